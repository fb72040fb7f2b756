#include "hiso/metrics_io.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <sstream>

namespace hiso {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

json to_json(const RoundRecord& rec) {
  json j = {
      {"round", rec.round},
      {"loss", rec.loss},
      {"uplink_bytes", rec.uplink_bytes},
      {"downlink_bytes", rec.downlink_bytes},
      {"cumulative_bytes", rec.cumulative_bytes},
      {"hessian", {{"min", rec.hessian.min}, {"q25", rec.hessian.q25}, {"median", rec.hessian.median},
                   {"q75", rec.hessian.q75}, {"max", rec.hessian.max}, {"mean", rec.hessian.mean}}},
      {"function_evals", rec.function_evals},
      {"rebuild_steps", rec.rebuild_steps},
      {"participants", rec.participants},
      {"wall_ms", rec.wall_ms},
  };
  if (rec.diagnostics) {
    j["diagnostics"] = {{"kappa", rec.diagnostics->effective_rank_kappa},
                        {"zeta", rec.diagnostics->whitening_rank_zeta},
                        {"spectral", rec.diagnostics->spectral_term}};
  }
  return j;
}

void write_jsonl(std::ostream& out, const Trace& trace) {
  for (const RoundRecord& rec : trace.rounds) out << to_json(rec).dump() << '\n';
}

std::string summary_row(const Trace& trace, Method method) {
  double best = trace.initial_loss;
  std::uint64_t evals = 0;
  std::uint64_t rebuilds = 0;
  std::uint64_t up = 0;
  std::uint64_t down = 0;
  for (const RoundRecord& r : trace.rounds) {
    best = std::min(best, r.loss);
    evals += r.function_evals;
    rebuilds += r.rebuild_steps;
    up += r.uplink_bytes;
    down += r.downlink_bytes;
  }
  const double final_loss = trace.rounds.empty() ? trace.initial_loss : trace.rounds.back().loss;
  const double per_client = trace.meter.per_client_bytes();
  std::ostringstream os;
  os << to_string(method) << ',' << trace.rounds.size() << ',' << format_double(trace.initial_loss)
     << ',' << format_double(final_loss) << ',' << format_double(best) << ',' << up << ',' << down
     << ',' << up + down << ',' << format_double(per_client) << ','
     << format_double(per_client / 1000.0) << ',' << format_double(per_client / 1024.0) << ','
     << evals << ',' << rebuilds;
  return os.str();
}

}  // namespace hiso
