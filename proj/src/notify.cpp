#include "athena/notify.hpp"

#include <fstream>
#include <unordered_map>

#include "athena/error.hpp"

namespace athena::notify {

namespace {

constexpr std::int64_t kDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// 1970-01-01 was a Thursday; Monday = 0.
int iso_weekday(std::int64_t day) { return static_cast<int>(((day + 3) % 7 + 7) % 7); }

// First occurrence at or after local time `t`.
std::int64_t first_occurrence_from(const DeliverySchedule& s, std::int64_t t) {
  const std::int64_t day = floor_div(t, kDay);
  const std::int64_t at = s.minute_of_day * 60LL;
  if (s.frequency == Frequency::daily) {
    std::int64_t occ = day * kDay + at;
    return occ < t ? occ + kDay : occ;
  }
  const int target = static_cast<int>(*s.weekday);
  const int delta = (target - iso_weekday(day) + 7) % 7;
  std::int64_t occ = (day + delta) * kDay + at;
  return occ < t ? occ + 7 * kDay : occ;
}

std::string escape_html(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

// First `limit` UTF-8 code points.
std::string truncate_chars(std::string_view s, std::size_t limit) {
  std::size_t chars = 0, i = 0;
  while (i < s.size()) {
    if (chars == limit) return std::string(s.substr(0, i)) + "...";
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 1;
    i += len;
    ++chars;
  }
  return std::string(s);
}

}  // namespace

std::optional<std::int64_t> next_due(const DeliverySchedule& schedule, std::optional<std::int64_t> last_sent,
                                     std::int64_t now) {
  if (!schedule.enabled) return std::nullopt;
  validate(schedule);
  const std::int64_t offset = schedule.utc_offset_minutes * 60LL;
  // Start of the local period (day or ISO week) holding `t`, in local days.
  auto period_start = [&](std::int64_t t) {
    const std::int64_t day = floor_div(t + offset, kDay);
    return schedule.frequency == Frequency::daily ? day : day - iso_weekday(day);
  };
  const std::int64_t period_days = schedule.frequency == Frequency::daily ? 1 : 7;
  // After a send, skip to the next period: a late catch-up send must not be
  // followed by a second one in the same local day or week.
  const std::int64_t from = last_sent ? (period_start(*last_sent) + period_days) * kDay : period_start(now) * kDay;
  return first_occurrence_from(schedule, from) - offset;
}

std::string_view to_string(DeliveryStatus s) { return s == DeliveryStatus::delivered ? "delivered" : "failed"; }

nlohmann::ordered_json to_json(const DeliveryRecord& r) {
  nlohmann::ordered_json j;
  j["user_id"] = r.user_id;
  j["sent_at"] = r.sent_at;
  j["item_ids"] = r.item_ids;
  j["sink_name"] = r.sink_name;
  j["status"] = to_string(r.status);
  return j;
}

DeliveryRecord delivery_from_json(const nlohmann::json& j, std::size_t line) {
  DeliveryRecord r;
  try {
    r.user_id = j.at("user_id").get<std::string>();
    r.sent_at = j.at("sent_at").get<std::int64_t>();
    r.item_ids = j.at("item_ids").get<std::vector<std::string>>();
    r.sink_name = j.at("sink_name").get<std::string>();
    const auto status = j.at("status").get<std::string>();
    if (status == "delivered")
      r.status = DeliveryStatus::delivered;
    else if (status == "failed")
      r.status = DeliveryStatus::failed;
    else
      throw ValidationError(line, "status", "unknown value '" + status + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(line, "delivery", e.what());
  }
  if (r.status == DeliveryStatus::delivered && r.item_ids.empty())
    throw ValidationError(line, "item_ids", "delivered records list at least one item");
  return r;
}

DeliveryLog::DeliveryLog(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(*path_)) return;
  std::ifstream in(*path_);
  if (!in) throw IoError("cannot read " + path_->string());
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line, e.what());
    }
    records_.push_back(delivery_from_json(j, line));
  }
}

void DeliveryLog::append(const DeliveryRecord& record) {
  std::lock_guard lock(mutex_);
  if (path_) {
    std::ofstream out(*path_, std::ios::app);
    if (!out) throw IoError("cannot append to " + path_->string());
    out << to_json(record).dump() << '\n';
    out.flush();
    if (!out) throw IoError("append failed on " + path_->string());
  }
  records_.push_back(record);
}

std::vector<DeliveryRecord> DeliveryLog::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::optional<std::int64_t> DeliveryLog::last_attempt(std::string_view user_id) const {
  std::lock_guard lock(mutex_);
  std::optional<std::int64_t> last;
  for (const auto& r : records_)
    if (r.user_id == user_id && (!last || r.sent_at > *last)) last = r.sent_at;
  return last;
}

std::set<std::string> DeliveryLog::delivered_items(std::string_view user_id) const {
  std::lock_guard lock(mutex_);
  std::set<std::string> items;
  for (const auto& r : records_)
    if (r.user_id == user_id && r.status == DeliveryStatus::delivered) items.insert(r.item_ids.begin(), r.item_ids.end());
  return items;
}

std::optional<NotificationDigest> build_digest(const catalog::UserProfile& user, const hybrid::Context& ctx,
                                               std::size_t n, const DeliveryLog& log, std::int64_t now) {
  if (!ctx.find_user(user.id)) throw UnknownUserError(user.id);
  const auto already = log.delivered_items(user.id);
  hybrid::BlendConfig blend;
  blend.preference_mode = hybrid::PreferenceMode::filter;
  auto recs = ctx.recommender().recommend(user, ctx.events_of(user.id), ctx.item_event_counts(), n + already.size(),
                                          blend);

  NotificationDigest digest;
  digest.user_id = user.id;
  digest.generated_at = now;
  digest.period_label = std::string(to_string(user.schedule.frequency));
  for (auto& r : recs) {
    if (digest.recommendations.size() == n) break;
    if (!already.contains(r.item_id)) digest.recommendations.push_back(std::move(r));
  }
  if (digest.recommendations.empty()) return std::nullopt;
  return digest;
}

EmailMessage render_email(const NotificationDigest& digest, const catalog::UserProfile& user,
                          std::span<const catalog::Item> items) {
  std::unordered_map<std::string_view, const catalog::Item*> by_id;
  for (const auto& item : items) by_id.emplace(item.id, &item);

  EmailMessage msg;
  msg.to = user.email;
  msg.subject = "Your " + digest.period_label + " recommendations (" +
                std::to_string(digest.recommendations.size()) + " items)";

  const std::string name = user.full_name.empty() ? user.id : user.full_name;
  std::string text = "Hello " + name + ",\n\nHere are your " + digest.period_label +
                     " recommendations from the library:\n\n";
  std::string html = "<!DOCTYPE html>\n<html><body>\n<p>Hello " + escape_html(name) + ",</p>\n<p>Here are your " +
                     escape_html(digest.period_label) + " recommendations from the library:</p>\n<ol>\n";
  std::size_t rank = 0;
  for (const auto& r : digest.recommendations) {
    ++rank;
    auto it = by_id.find(r.item_id);
    const std::string title = it == by_id.end() ? r.item_id : it->second->title;
    const std::string blurb = it == by_id.end() ? std::string{} : truncate_chars(it->second->description, 200);
    text += std::to_string(rank) + ". " + title + "\n";
    if (!blurb.empty()) text += "   " + blurb + "\n";
    text += "   Why: " + r.reason + "\n\n";
    html += "<li><strong>" + escape_html(title) + "</strong>";
    if (!blurb.empty()) html += "<br>" + escape_html(blurb);
    html += "<br><em>Why: " + escape_html(r.reason) + "</em></li>\n";
  }
  text += "You receive this because notifications are enabled in your delivery schedule.\n";
  html += "</ol>\n<p>You receive this because notifications are enabled in your delivery schedule.</p>\n"
          "</body></html>\n";
  msg.text_body = std::move(text);
  msg.html_body = std::move(html);
  return msg;
}

std::string to_eml(const EmailMessage& msg, std::string_view boundary) {
  std::string b(boundary);
  std::string out;
  out += "To: " + msg.to + "\r\n";
  out += "Subject: " + msg.subject + "\r\n";
  out += "MIME-Version: 1.0\r\n";
  out += "Content-Type: multipart/alternative; boundary=\"" + b + "\"\r\n\r\n";
  out += "--" + b + "\r\nContent-Type: text/plain; charset=utf-8\r\n\r\n" + msg.text_body + "\r\n";
  out += "--" + b + "\r\nContent-Type: text/html; charset=utf-8\r\n\r\n" + msg.html_body + "\r\n";
  out += "--" + b + "--\r\n";
  return out;
}

std::vector<DeliveryRecord> scheduler_tick(std::int64_t now, std::span<const catalog::UserProfile> users,
                                           const hybrid::Context& ctx, DeliveryLog& log, DeliverySink& sink,
                                           std::size_t n) {
  std::vector<DeliveryRecord> out;
  for (const auto& user : users) {
    const auto due = next_due(user.schedule, log.last_attempt(user.id), now);
    if (!due || *due > now) continue;
    std::optional<NotificationDigest> digest;
    try {
      digest = build_digest(user, ctx, n, log, now);
    } catch (const UnknownUserError&) {
      continue;
    }
    if (!digest) continue;

    DeliveryRecord record;
    record.user_id = user.id;
    record.sent_at = now;
    record.sink_name = sink.name();
    for (const auto& r : digest->recommendations) record.item_ids.push_back(r.item_id);
    try {
      sink.deliver(render_email(*digest, user, ctx.recommender().items()), user.id, now);
      record.status = DeliveryStatus::delivered;
    } catch (const std::exception&) {
      record.status = DeliveryStatus::failed;
    }
    log.append(record);
    out.push_back(std::move(record));
  }
  return out;
}

std::vector<DeliveryRecord> Scheduler::tick(std::int64_t now, std::span<const catalog::UserProfile> users,
                                            const hybrid::Context& ctx, DeliveryLog& log, DeliverySink& sink,
                                            std::size_t n) {
  std::lock_guard lock(running_);
  return scheduler_tick(now, users, ctx, log, sink, n);
}

}  // namespace athena::notify
