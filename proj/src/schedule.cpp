#include "athena/schedule.hpp"

#include <array>
#include <cstdio>

#include "athena/error.hpp"

namespace athena::notify {

namespace {

constexpr std::array<std::string_view, 7> kWeekdays = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"};

}  // namespace

std::string_view to_string(Frequency f) { return f == Frequency::daily ? "daily" : "weekly"; }
std::string_view to_string(Weekday d) { return kWeekdays[static_cast<std::size_t>(d)]; }

std::optional<Frequency> parse_frequency(std::string_view s) {
  if (s == "daily") return Frequency::daily;
  if (s == "weekly") return Frequency::weekly;
  return std::nullopt;
}

std::optional<Weekday> parse_weekday(std::string_view s) {
  for (std::size_t i = 0; i < kWeekdays.size(); ++i)
    if (kWeekdays[i] == s) return static_cast<Weekday>(i);
  return std::nullopt;
}

std::string format_time_of_day(int minute_of_day) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02d:%02d", minute_of_day / 60, minute_of_day % 60);
  return buf;
}

std::optional<int> parse_time_of_day(std::string_view hhmm) {
  if (hhmm.size() != 5 || hhmm[2] != ':') return std::nullopt;
  auto digit = [&](std::size_t i) { return hhmm[i] >= '0' && hhmm[i] <= '9'; };
  if (!digit(0) || !digit(1) || !digit(3) || !digit(4)) return std::nullopt;
  const int h = (hhmm[0] - '0') * 10 + (hhmm[1] - '0');
  const int m = (hhmm[3] - '0') * 10 + (hhmm[4] - '0');
  if (h > 23 || m > 59) return std::nullopt;
  return h * 60 + m;
}

void validate(const DeliverySchedule& s, std::size_t line) {
  if (s.minute_of_day < 0 || s.minute_of_day >= 24 * 60) throw ValidationError(line, "time_of_day", "outside 00:00-23:59");
  if (s.utc_offset_minutes < -720 || s.utc_offset_minutes > 840)
    throw ValidationError(line, "utc_offset_minutes", "outside [-720, 840]");
  if ((s.frequency == Frequency::weekly) != s.weekday.has_value())
    throw ValidationError(line, "weekday", "required for weekly schedules and only for them");
}

nlohmann::ordered_json schedule_to_json(const DeliverySchedule& s) {
  nlohmann::ordered_json j;
  j["enabled"] = s.enabled;
  j["frequency"] = to_string(s.frequency);
  j["weekday"] = s.weekday ? nlohmann::ordered_json(to_string(*s.weekday)) : nlohmann::ordered_json(nullptr);
  j["time_of_day"] = format_time_of_day(s.minute_of_day);
  j["utc_offset_minutes"] = s.utc_offset_minutes;
  return j;
}

DeliverySchedule schedule_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw ValidationError(line, "schedule", "expected an object");
  DeliverySchedule s;
  if (auto it = j.find("enabled"); it != j.end()) {
    if (!it->is_boolean()) throw ValidationError(line, "enabled", "expected a boolean");
    s.enabled = it->get<bool>();
  }
  if (auto it = j.find("frequency"); it != j.end()) {
    auto f = it->is_string() ? parse_frequency(it->get<std::string>()) : std::nullopt;
    if (!f) throw ValidationError(line, "frequency", "expected \"daily\" or \"weekly\"");
    s.frequency = *f;
  }
  if (auto it = j.find("weekday"); it != j.end() && !it->is_null()) {
    auto d = it->is_string() ? parse_weekday(it->get<std::string>()) : std::nullopt;
    if (!d) throw ValidationError(line, "weekday", "expected mon..sun");
    s.weekday = *d;
  }
  if (auto it = j.find("time_of_day"); it != j.end()) {
    auto t = it->is_string() ? parse_time_of_day(it->get<std::string>()) : std::nullopt;
    if (!t) throw ValidationError(line, "time_of_day", "expected HH:MM (24h)");
    s.minute_of_day = *t;
  }
  if (auto it = j.find("utc_offset_minutes"); it != j.end()) {
    if (!it->is_number_integer()) throw ValidationError(line, "utc_offset_minutes", "expected an integer");
    s.utc_offset_minutes = it->get<int>();
  }
  validate(s, line);
  return s;
}

}  // namespace athena::notify
