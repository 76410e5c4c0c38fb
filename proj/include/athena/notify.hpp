#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "athena/catalog.hpp"
#include "athena/hybrid.hpp"
#include "athena/schedule.hpp"

namespace athena::notify {

/// The first scheduled occurrence in a later local period (day or ISO week)
/// than `last_sent`, which is also strictly after it; or, when
/// nothing was sent yet, the first occurrence in the current local day
/// (daily) or ISO week (weekly), which may already be in the past. Local
/// time is UTC + utc_offset_minutes; the result is UTC seconds. nullopt when
/// the schedule is disabled.
std::optional<std::int64_t> next_due(const DeliverySchedule& schedule, std::optional<std::int64_t> last_sent,
                                     std::int64_t now);

struct NotificationDigest {
  std::string user_id;
  std::int64_t generated_at = 0;
  std::vector<hybrid::Recommendation> recommendations;  // non-empty
  std::string period_label;                              // "daily" / "weekly"
};

enum class DeliveryStatus { delivered, failed };
std::string_view to_string(DeliveryStatus s);

struct DeliveryRecord {
  std::string user_id;
  std::int64_t sent_at = 0;
  std::vector<std::string> item_ids;
  std::string sink_name;
  DeliveryStatus status = DeliveryStatus::delivered;

  bool operator==(const DeliveryRecord&) const = default;
};

nlohmann::ordered_json to_json(const DeliveryRecord& r);
DeliveryRecord delivery_from_json(const nlohmann::json& j, std::size_t line = 0);

/// Append-only delivery history, optionally mirrored to deliveries.jsonl.
class DeliveryLog {
 public:
  DeliveryLog() = default;
  // Replays `path` if it exists; later appends are written through.
  explicit DeliveryLog(std::filesystem::path path);

  void append(const DeliveryRecord& record);
  std::vector<DeliveryRecord> records() const;
  // sent_at of the user's latest attempt, delivered or failed.
  std::optional<std::int64_t> last_attempt(std::string_view user_id) const;
  std::set<std::string> delivered_items(std::string_view user_id) const;

 private:
  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> path_;
  std::vector<DeliveryRecord> records_;
};

/// Recommendations for `user` minus everything already delivered to them;
/// nullopt when nothing is left. Throws UnknownUserError when the user is
/// not in the context.
std::optional<NotificationDigest> build_digest(const catalog::UserProfile& user, const hybrid::Context& ctx,
                                               std::size_t n, const DeliveryLog& log, std::int64_t now);

struct EmailMessage {
  std::string to;
  std::string subject;
  std::string text_body;
  std::string html_body;

  bool operator==(const EmailMessage&) const = default;
};

EmailMessage render_email(const NotificationDigest& digest, const catalog::UserProfile& user,
                          std::span<const catalog::Item> items);

// RFC 5322 style message with a multipart/alternative body.
std::string to_eml(const EmailMessage& msg, std::string_view boundary);

class DeliverySink {
 public:
  virtual ~DeliverySink() = default;
  virtual std::string name() const = 0;
  // Throws on failure.
  virtual void deliver(const EmailMessage& msg, std::string_view user_id, std::int64_t sent_at) = 0;
};

/// Writes <user_id>-<sent_at>.eml into an outbox directory.
class FileSink : public DeliverySink {
 public:
  explicit FileSink(std::filesystem::path outbox);
  std::string name() const override { return "file"; }
  void deliver(const EmailMessage& msg, std::string_view user_id, std::int64_t sent_at) override;

 private:
  std::filesystem::path outbox_;
};

class StdoutSink : public DeliverySink {
 public:
  explicit StdoutSink(std::ostream& out);
  std::string name() const override { return "stdout"; }
  void deliver(const EmailMessage& msg, std::string_view user_id, std::int64_t sent_at) override;

 private:
  std::ostream* out_;
};

struct SmtpConfig {
  std::string host;
  int port = 587;
  std::string user;
  std::string password;
  std::string from = "athena@localhost";

  // ATHENA_SMTP_HOST (required), ATHENA_SMTP_PORT, ATHENA_SMTP_USER,
  // ATHENA_SMTP_PASS, ATHENA_SMTP_FROM. Throws ConfigError without a host.
  static SmtpConfig from_env();
};

class SmtpSink : public DeliverySink {
 public:
  explicit SmtpSink(SmtpConfig config);
  std::string name() const override { return "smtp"; }
  void deliver(const EmailMessage& msg, std::string_view user_id, std::int64_t sent_at) override;

 private:
  SmtpConfig config_;
};

/// One scheduler pass: every user whose next_due is at or before `now` gets a
/// digest handed to `sink`. Sink failures become failed records and never
/// abort the pass. Records are appended to `log` and returned.
std::vector<DeliveryRecord> scheduler_tick(std::int64_t now, std::span<const catalog::UserProfile> users,
                                           const hybrid::Context& ctx, DeliveryLog& log, DeliverySink& sink,
                                           std::size_t n = 5);

/// Serialises scheduler_tick calls so at most one runs at a time.
class Scheduler {
 public:
  std::vector<DeliveryRecord> tick(std::int64_t now, std::span<const catalog::UserProfile> users,
                                   const hybrid::Context& ctx, DeliveryLog& log, DeliverySink& sink,
                                   std::size_t n = 5);

 private:
  std::mutex running_;
};

}  // namespace athena::notify
