#pragma once

// Clickstream ingestion: parse page-view logs, drop untrusted dwell times and
// reduce to per-article click counts and dwell sums.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hf {

struct PageViewEvent {
  std::string event_id;
  std::string user_id;
  std::string article_id;
  std::int64_t timestamp = 0;  // seconds since the Unix epoch, UTC
  double dwell_seconds = 0.0;

  friend bool operator==(const PageViewEvent&, const PageViewEvent&) = default;
};

// Checked in this order; the first failing check names the reason.
enum class RejectReason { malformed, missing_field, negative_dwell, bad_timestamp };

std::string_view to_string(RejectReason reason);

struct RejectRecord {
  std::size_t line_number = 0;  // 1-based
  std::string raw_line;
  RejectReason reason = RejectReason::malformed;
};

struct ParseResult {
  std::vector<PageViewEvent> events;
  std::vector<RejectRecord> rejects;
};

struct EngagementAggregate {
  std::string article_id;
  std::uint64_t click_count = 0;
  double total_dwell_seconds = 0.0;

  friend bool operator==(const EngagementAggregate&, const EngagementAggregate&) = default;
};

// Ordered by article id so iteration (and everything serialized from it) is
// deterministic.
using AggregateMap = std::map<std::string, EngagementAggregate, std::less<>>;

struct NoiseFilter {
  double cap_seconds = 600.0;
  double floor_seconds = 1.0;
};

// ISO-8601 UTC ("2019-01-01T00:00:00Z"; fractional seconds are truncated,
// "+00:00" accepted in place of "Z").
std::optional<std::int64_t> parse_timestamp(std::string_view text);
std::string format_timestamp(std::int64_t seconds);

// Parses one record. On failure returns nullopt and sets `reason`.
std::optional<PageViewEvent> parse_log_line(std::string_view line, RejectReason& reason);

ParseResult parse_log_stream(std::istream& in);
// Plain or gzip-compressed file.
ParseResult parse_log_file(const std::filesystem::path& path);

std::string serialize_event(const PageViewEvent& event);
void write_events(std::ostream& out, std::span<const PageViewEvent> events);

// Drops events below the floor and clamps dwell above the cap (the click is
// kept). Throws ErrorCode::config unless cap > floor.
std::vector<PageViewEvent> filter_noise(std::vector<PageViewEvent> events,
                                        const NoiseFilter& filter);

AggregateMap aggregate_engagement(std::span<const PageViewEvent> events);
AggregateMap merge_aggregates(const AggregateMap& left, const AggregateMap& right);

// Aggregates `partitions` contiguous chunks concurrently and merges them in
// chunk order.
AggregateMap aggregate_partitioned(std::span<const PageViewEvent> events, std::size_t partitions);

std::uint64_t total_clicks(const AggregateMap& aggregates);

void write_aggregates(std::ostream& out, const AggregateMap& aggregates);
AggregateMap read_aggregates(std::istream& in);

}  // namespace hf
