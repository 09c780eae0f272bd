#include "histchain/events.hpp"

#include <algorithm>

namespace histchain {

std::string_view to_string(Severity s) { return s == Severity::Alarm ? "ALARM" : "INFO"; }

const EventRecord& EventLog::emit(std::string_view actor, Severity severity,
                                  std::string_view code, std::string detail) {
  std::replace(detail.begin(), detail.end(), '\t', ' ');
  std::replace(detail.begin(), detail.end(), '\n', ' ');
  records_.push_back(EventRecord{tick_, records_.size(), std::string(actor), severity,
                                 std::string(code), std::move(detail)});
  return records_.back();
}

std::size_t EventLog::count(std::string_view code) const {
  return static_cast<std::size_t>(std::count_if(
      records_.begin(), records_.end(), [&](const EventRecord& r) { return r.code == code; }));
}

std::size_t EventLog::count(std::string_view actor, std::string_view code) const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(),
                    [&](const EventRecord& r) { return r.actor == actor && r.code == code; }));
}

void EventLog::write(std::ostream& out) const {
  for (const auto& r : records_) {
    out << r.tick << '\t' << r.actor << '\t' << to_string(r.severity) << '\t' << r.code << '\t'
        << r.detail << '\n';
  }
}

}  // namespace histchain
