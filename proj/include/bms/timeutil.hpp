#pragma once

#include <cstdint>
#include <memory>
#include <string>

namespace bms {

// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

std::string to_rfc3339(Timestamp t);
Timestamp parse_rfc3339(const std::string& s);

class Clock {
public:
    virtual ~Clock() = default;
    virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
public:
    Timestamp now() const override;
};

class FixedClock final : public Clock {
public:
    explicit FixedClock(Timestamp t) : t_(t) {}
    Timestamp now() const override { return t_; }

private:
    Timestamp t_;
};

} // namespace bms
