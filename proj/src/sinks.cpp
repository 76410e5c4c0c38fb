#include <cstdlib>
#include <cstring>
#include <fstream>
#include <ostream>

#include <curl/curl.h>

#include "athena/error.hpp"
#include "athena/notify.hpp"

namespace athena::notify {

namespace {

std::string boundary_for(std::string_view user_id, std::int64_t sent_at) {
  return "athena-" + std::string(user_id) + "-" + std::to_string(sent_at);
}

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

struct Upload {
  std::string data;
  std::size_t pos = 0;
};

std::size_t read_upload(char* buf, std::size_t size, std::size_t nitems, void* user) {
  auto* up = static_cast<Upload*>(user);
  const std::size_t n = std::min(size * nitems, up->data.size() - up->pos);
  std::memcpy(buf, up->data.data() + up->pos, n);
  up->pos += n;
  return n;
}

}  // namespace

FileSink::FileSink(std::filesystem::path outbox) : outbox_(std::move(outbox)) {
  std::error_code ec;
  std::filesystem::create_directories(outbox_, ec);
  if (ec) throw IoError("cannot create outbox " + outbox_.string() + ": " + ec.message());
}

void FileSink::deliver(const EmailMessage& msg, std::string_view user_id, std::int64_t sent_at) {
  const auto path = outbox_ / (std::string(user_id) + "-" + std::to_string(sent_at) + ".eml");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_eml(msg, boundary_for(user_id, sent_at));
  if (!out) throw IoError("write failed on " + path.string());
}

StdoutSink::StdoutSink(std::ostream& out) : out_(&out) {}

void StdoutSink::deliver(const EmailMessage& msg, std::string_view user_id, std::int64_t sent_at) {
  *out_ << to_eml(msg, boundary_for(user_id, sent_at)) << '\n';
  out_->flush();
  if (!*out_) throw IoError("stdout sink write failed");
}

SmtpConfig SmtpConfig::from_env() {
  SmtpConfig c;
  const char* host = env("ATHENA_SMTP_HOST");
  if (!host) throw ConfigError("ATHENA_SMTP_HOST is not set");
  c.host = host;
  if (const char* port = env("ATHENA_SMTP_PORT")) {
    char* end = nullptr;
    long p = std::strtol(port, &end, 10);
    if (*end != '\0' || p <= 0 || p > 65535) throw ConfigError("ATHENA_SMTP_PORT is not a valid port");
    c.port = static_cast<int>(p);
  }
  if (const char* user = env("ATHENA_SMTP_USER")) c.user = user;
  if (const char* pass = env("ATHENA_SMTP_PASS")) c.password = pass;
  if (const char* from = env("ATHENA_SMTP_FROM")) c.from = from;
  return c;
}

SmtpSink::SmtpSink(SmtpConfig config) : config_(std::move(config)) {
  if (config_.host.empty()) throw ConfigError("SMTP host is empty");
}

void SmtpSink::deliver(const EmailMessage& msg, std::string_view user_id, std::int64_t sent_at) {
  CURL* curl = curl_easy_init();
  if (!curl) throw Error("curl_easy_init failed");
  Upload upload{"From: " + config_.from + "\r\n" + to_eml(msg, boundary_for(user_id, sent_at)), 0};
  const std::string url = "smtp://" + config_.host + ":" + std::to_string(config_.port);
  const std::string from = "<" + config_.from + ">";
  const std::string to = "<" + msg.to + ">";
  curl_slist* rcpt = curl_slist_append(nullptr, to.c_str());

  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_USE_SSL, static_cast<long>(CURLUSESSL_TRY));
  if (!config_.user.empty()) {
    curl_easy_setopt(curl, CURLOPT_USERNAME, config_.user.c_str());
    curl_easy_setopt(curl, CURLOPT_PASSWORD, config_.password.c_str());
  }
  curl_easy_setopt(curl, CURLOPT_MAIL_FROM, from.c_str());
  curl_easy_setopt(curl, CURLOPT_MAIL_RCPT, rcpt);
  curl_easy_setopt(curl, CURLOPT_READFUNCTION, read_upload);
  curl_easy_setopt(curl, CURLOPT_READDATA, &upload);
  curl_easy_setopt(curl, CURLOPT_UPLOAD, 1L);
  curl_easy_setopt(curl, CURLOPT_TIMEOUT, 30L);

  const CURLcode rc = curl_easy_perform(curl);
  curl_slist_free_all(rcpt);
  curl_easy_cleanup(curl);
  if (rc != CURLE_OK) throw Error(std::string("SMTP delivery failed: ") + curl_easy_strerror(rc));
}

}  // namespace athena::notify
