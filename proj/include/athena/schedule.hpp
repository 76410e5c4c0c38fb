#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace athena::notify {

enum class Frequency { daily, weekly };

// ISO weekday order; Monday = 0.
enum class Weekday { mon, tue, wed, thu, fri, sat, sun };

/// Per-user cadence for recommendation digests.
///
/// `weekday` is present exactly when `frequency` is weekly. Times are local to
/// the user and converted with `utc_offset_minutes`.
struct DeliverySchedule {
  bool enabled = false;
  Frequency frequency = Frequency::daily;
  std::optional<Weekday> weekday;
  int minute_of_day = 8 * 60;  // HH:MM as minutes after local midnight
  int utc_offset_minutes = 0;

  bool operator==(const DeliverySchedule&) const = default;
};

std::string_view to_string(Frequency f);
std::string_view to_string(Weekday d);
std::optional<Frequency> parse_frequency(std::string_view s);
std::optional<Weekday> parse_weekday(std::string_view s);

std::string format_time_of_day(int minute_of_day);
std::optional<int> parse_time_of_day(std::string_view hhmm);

// Throws ValidationError naming the field.
void validate(const DeliverySchedule& s, std::size_t line = 0);

nlohmann::ordered_json schedule_to_json(const DeliverySchedule& s);
// Throws ValidationError (line 0 unless given) on bad fields.
DeliverySchedule schedule_from_json(const nlohmann::json& j, std::size_t line = 0);

}  // namespace athena::notify
