#ifndef HISO_METRICS_IO_HPP
#define HISO_METRICS_IO_HPP

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "hiso/fedsim.hpp"

namespace hiso {

nlohmann::json to_json(const RoundRecord& record);

/// One JSON object per round.
void write_jsonl(std::ostream& out, const Trace& trace);

inline constexpr const char* kSummaryHeader =
    "method,rounds,initial_loss,final_loss,best_loss,uplink_bytes,downlink_bytes,total_bytes,"
    "per_client_bytes,per_client_kb,per_client_kib,function_evals,rebuild_steps";

/// One CSV row (no header) summarizing a run.
std::string summary_row(const Trace& trace, Method method);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

}  // namespace hiso

#endif  // HISO_METRICS_IO_HPP
