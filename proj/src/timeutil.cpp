#include "bms/timeutil.hpp"

#include "bms/error.hpp"

#include <cstdio>
#include <ctime>

namespace bms {

std::string to_rfc3339(Timestamp t) {
    std::time_t tt = static_cast<std::time_t>(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

Timestamp parse_rfc3339(const std::string& s) {
    std::tm tm{};
    int off_sign = 0, off_h = 0, off_m = 0;
    char tz = 0;
    int n = std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d%c", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                        &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &tz);
    if (n < 6) raise(ErrorKind::parse, "bad RFC 3339 timestamp: " + s);
    if (n == 7 && tz != 'Z' && tz != 'z') {
        if (tz == '+')
            off_sign = 1;
        else if (tz == '-')
            off_sign = -1;
        else
            raise(ErrorKind::parse, "bad RFC 3339 timezone: " + s);
        size_t tzpos = s.find(tz, 10);
        if (tzpos == std::string::npos ||
            std::sscanf(s.c_str() + tzpos + 1, "%d:%d", &off_h, &off_m) != 2)
            raise(ErrorKind::parse, "bad RFC 3339 offset: " + s);
    }
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    std::time_t utc = timegm(&tm);
    return static_cast<Timestamp>(utc) - off_sign * (off_h * 3600 + off_m * 60);
}

Timestamp SystemClock::now() const {
    return static_cast<Timestamp>(std::time(nullptr));
}

} // namespace bms
