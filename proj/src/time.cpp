#include "swarm/time.hpp"

#include <charconv>
#include <cstdio>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace swarm {

Timestamp now_utc() {
    return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

Clock stepping_clock(Timestamp start, std::chrono::milliseconds step) {
    struct State {
        std::mutex mu;
        Timestamp next;
    };
    auto state = std::make_shared<State>();
    state->next = start;
    return [state, step] {
        std::lock_guard lock(state->mu);
        auto t = state->next;
        state->next += step;
        return t;
    };
}

std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    auto day = floor<days>(t);
    year_month_day ymd{day};
    hh_mm_ss tod{t - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                  static_cast<int>(tod.seconds().count()), static_cast<int>(tod.subseconds().count()));
    return buf;
}

namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len) {
    if (pos + len > text.size()) throw std::invalid_argument("timestamp too short");
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
    if (ec != std::errc{} || ptr != text.data() + pos + len)
        throw std::invalid_argument("bad timestamp: " + std::string(text));
    return value;
}

void expect(std::string_view text, std::size_t pos, char c) {
    if (pos >= text.size() || text[pos] != c) throw std::invalid_argument("bad timestamp: " + std::string(text));
}

} // namespace

Timestamp parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    int y = read_int(text, 0, 4);
    expect(text, 4, '-');
    int mo = read_int(text, 5, 2);
    expect(text, 7, '-');
    int d = read_int(text, 8, 2);
    expect(text, 10, 'T');
    int h = read_int(text, 11, 2);
    expect(text, 13, ':');
    int mi = read_int(text, 14, 2);
    expect(text, 16, ':');
    int s = read_int(text, 17, 2);
    std::size_t pos = 19;
    int ms = 0;
    if (pos < text.size() && text[pos] == '.') {
        std::size_t start = ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
        if (pos == start) throw std::invalid_argument("bad timestamp: " + std::string(text));
        auto digits = text.substr(start, std::min<std::size_t>(3, pos - start));
        ms = read_int(digits, 0, digits.size());
        for (auto n = digits.size(); n < 3; ++n) ms *= 10;
    }
    expect(text, pos, 'Z');
    if (pos + 1 != text.size()) throw std::invalid_argument("bad timestamp: " + std::string(text));

    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw std::invalid_argument("bad timestamp: " + std::string(text));
    return Timestamp{sys_days{ymd}.time_since_epoch() + hours{h} + minutes{mi} + seconds{s} + milliseconds{ms}};
}

} // namespace swarm
