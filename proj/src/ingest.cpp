#include "headline_forge/ingest.hpp"

#include <zlib.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <memory>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "headline_forge/error.hpp"

namespace hf {

using nlohmann::json;

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::malformed: return "malformed";
    case RejectReason::missing_field: return "missing_field";
    case RejectReason::negative_dwell: return "negative_dwell";
    case RejectReason::bad_timestamp: return "bad_timestamp";
  }
  return "malformed";
}

namespace {

bool read_digits(std::string_view s, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(std::string_view s) {
  // YYYY-MM-DDTHH:MM:SS[.fff][Z|+00:00]
  int year, month, day, hour, minute, second;
  if (!read_digits(s, 0, 4, year) || s.size() < 19 || s[4] != '-' ||
      !read_digits(s, 5, 2, month) || s[7] != '-' || !read_digits(s, 8, 2, day) ||
      (s[10] != 'T' && s[10] != 't') || !read_digits(s, 11, 2, hour) || s[13] != ':' ||
      !read_digits(s, 14, 2, minute) || s[16] != ':' || !read_digits(s, 17, 2, second)) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == start) return std::nullopt;
  }
  const std::string_view zone = s.substr(pos);
  if (zone != "Z" && zone != "z" && zone != "+00:00") return std::nullopt;
  if (hour > 23 || minute > 59 || second > 59) return std::nullopt;
  const std::chrono::year_month_day date{std::chrono::year(year),
                                         std::chrono::month(static_cast<unsigned>(month)),
                                         std::chrono::day(static_cast<unsigned>(day))};
  if (!date.ok()) return std::nullopt;
  const auto days = std::chrono::sys_days(date).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp(std::int64_t seconds) {
  const std::int64_t days = (seconds >= 0 ? seconds : seconds - 86399) / 86400;
  const std::int64_t rem = seconds - days * 86400;
  const std::chrono::year_month_day date{
      std::chrono::sys_days(std::chrono::days(static_cast<int>(days)))};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                static_cast<int>(rem % 60));
  return buf;
}

std::optional<PageViewEvent> parse_log_line(std::string_view line, RejectReason& reason) {
  json record = json::parse(line.begin(), line.end(), nullptr, false);
  if (record.is_discarded() || !record.is_object()) {
    reason = RejectReason::malformed;
    return std::nullopt;
  }
  static constexpr const char* kStringFields[] = {"event_id", "user_id", "article_id", "ts"};
  for (const char* field : kStringFields) {
    auto it = record.find(field);
    if (it != record.end() && !it->is_null() && !it->is_string()) {
      reason = RejectReason::malformed;
      return std::nullopt;
    }
  }
  auto dwell = record.find("dwell_seconds");
  if (dwell != record.end() && !dwell->is_null() && !dwell->is_number()) {
    reason = RejectReason::malformed;
    return std::nullopt;
  }
  for (const char* field : kStringFields) {
    auto it = record.find(field);
    if (it == record.end() || it->is_null() || it->get_ref<const std::string&>().empty()) {
      reason = RejectReason::missing_field;
      return std::nullopt;
    }
  }
  if (dwell == record.end() || dwell->is_null()) {
    reason = RejectReason::missing_field;
    return std::nullopt;
  }
  const double dwell_seconds = dwell->get<double>();
  if (!(dwell_seconds >= 0.0)) {
    reason = RejectReason::negative_dwell;
    return std::nullopt;
  }
  const auto ts = parse_timestamp(record["ts"].get_ref<const std::string&>());
  if (!ts) {
    reason = RejectReason::bad_timestamp;
    return std::nullopt;
  }
  return PageViewEvent{record["event_id"].get<std::string>(), record["user_id"].get<std::string>(),
                       record["article_id"].get<std::string>(), *ts, dwell_seconds};
}

namespace {

void consume_line(std::string& line, std::size_t line_number, ParseResult& result) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  RejectReason reason;
  if (auto event = parse_log_line(line, reason)) {
    result.events.push_back(std::move(*event));
  } else {
    result.rejects.push_back({line_number, line, reason});
  }
}

struct GzCloser {
  void operator()(gzFile f) const { gzclose(f); }
};

}  // namespace

ParseResult parse_log_stream(std::istream& in) {
  if (!in) fail(ErrorCode::io, "log stream is not readable");
  ParseResult result;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) consume_line(line, ++line_number, result);
  if (in.bad()) fail(ErrorCode::io, "I/O error while reading log stream");
  return result;
}

ParseResult parse_log_file(const std::filesystem::path& path) {
  // gzread passes uncompressed files through unchanged.
  std::unique_ptr<gzFile_s, GzCloser> file(gzopen(path.c_str(), "rb"));
  if (!file) fail(ErrorCode::io, "cannot open log file " + path.string());
  ParseResult result;
  std::string line;
  std::size_t line_number = 0;
  char buffer[1 << 16];
  bool pending = false;
  while (true) {
    const int n = gzread(file.get(), buffer, sizeof(buffer));
    if (n < 0) {
      int code = 0;
      fail(ErrorCode::io, "error reading " + path.string() + ": " + gzerror(file.get(), &code));
    }
    if (n == 0) break;
    for (int i = 0; i < n; ++i) {
      if (buffer[i] == '\n') {
        consume_line(line, ++line_number, result);
        line.clear();
        pending = false;
      } else {
        line.push_back(buffer[i]);
        pending = true;
      }
    }
  }
  if (pending) consume_line(line, ++line_number, result);
  return result;
}

std::string serialize_event(const PageViewEvent& e) {
  json record = {{"event_id", e.event_id},
                 {"user_id", e.user_id},
                 {"article_id", e.article_id},
                 {"ts", format_timestamp(e.timestamp)},
                 {"dwell_seconds", e.dwell_seconds}};
  return record.dump();
}

void write_events(std::ostream& out, std::span<const PageViewEvent> events) {
  for (const auto& e : events) out << serialize_event(e) << '\n';
}

std::vector<PageViewEvent> filter_noise(std::vector<PageViewEvent> events,
                                        const NoiseFilter& filter) {
  if (!(filter.cap_seconds > filter.floor_seconds) || filter.floor_seconds < 0.0) {
    fail(ErrorCode::config, "noise filter needs cap > floor >= 0 (cap " +
                                std::to_string(filter.cap_seconds) + ", floor " +
                                std::to_string(filter.floor_seconds) + ")");
  }
  std::vector<PageViewEvent> kept;
  kept.reserve(events.size());
  for (auto& e : events) {
    if (e.dwell_seconds < filter.floor_seconds) continue;
    if (e.dwell_seconds > filter.cap_seconds) e.dwell_seconds = filter.cap_seconds;
    kept.push_back(std::move(e));
  }
  return kept;
}

AggregateMap aggregate_engagement(std::span<const PageViewEvent> events) {
  AggregateMap out;
  for (const auto& e : events) {
    auto it = out.find(e.article_id);
    if (it == out.end()) it = out.emplace(e.article_id, EngagementAggregate{e.article_id, 0, 0.0}).first;
    it->second.click_count += 1;
    it->second.total_dwell_seconds += e.dwell_seconds;
  }
  return out;
}

AggregateMap merge_aggregates(const AggregateMap& left, const AggregateMap& right) {
  AggregateMap out = left;
  for (const auto& [id, agg] : right) {
    auto [it, inserted] = out.emplace(id, agg);
    if (!inserted) {
      it->second.click_count += agg.click_count;
      it->second.total_dwell_seconds += agg.total_dwell_seconds;
    }
  }
  return out;
}

AggregateMap aggregate_partitioned(std::span<const PageViewEvent> events, std::size_t partitions) {
  partitions = std::max<std::size_t>(1, std::min(partitions, std::max<std::size_t>(1, events.size())));
  std::vector<AggregateMap> parts(partitions);
  std::vector<std::thread> workers;
  const std::size_t chunk = events.size() / partitions, extra = events.size() % partitions;
  std::size_t begin = 0;
  for (std::size_t p = 0; p < partitions; ++p) {
    const std::size_t len = chunk + (p < extra ? 1 : 0);
    workers.emplace_back([&parts, p, slice = events.subspan(begin, len)] {
      parts[p] = aggregate_engagement(slice);
    });
    begin += len;
  }
  for (auto& w : workers) w.join();
  AggregateMap merged;
  for (const auto& part : parts) merged = merge_aggregates(merged, part);
  return merged;
}

std::uint64_t total_clicks(const AggregateMap& aggregates) {
  std::uint64_t total = 0;
  for (const auto& [id, agg] : aggregates) total += agg.click_count;
  return total;
}

void write_aggregates(std::ostream& out, const AggregateMap& aggregates) {
  for (const auto& [id, agg] : aggregates) {
    json record = {{"article_id", id},
                   {"click_count", agg.click_count},
                   {"total_dwell_seconds", agg.total_dwell_seconds}};
    out << record.dump() << '\n';
  }
}

AggregateMap read_aggregates(std::istream& in) {
  AggregateMap out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.contains("article_id") ||
        !record.contains("click_count") || !record.contains("total_dwell_seconds")) {
      fail(ErrorCode::parse, "aggregates line " + std::to_string(line_number) + " is malformed");
    }
    EngagementAggregate agg{record["article_id"].get<std::string>(),
                            record["click_count"].get<std::uint64_t>(),
                            record["total_dwell_seconds"].get<double>()};
    require(agg.click_count >= 1 && agg.total_dwell_seconds >= 0.0, ErrorCode::domain,
            "aggregates line " + std::to_string(line_number) + " violates count/dwell invariants");
    auto id = agg.article_id;
    auto [it, inserted] = out.emplace(id, agg);
    if (!inserted) it->second = EngagementAggregate{
        id, it->second.click_count + agg.click_count,
        it->second.total_dwell_seconds + agg.total_dwell_seconds};
  }
  return out;
}

}  // namespace hf
