#include "dvi/report.hpp"

#include <cstdio>
#include <fstream>

#include "dvi/errors.hpp"

namespace dvi {

std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_report(std::span<const RunRecord> records, const std::string& path) {
  if (records.empty()) throw EmptyInput("write_report: no records");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "run_id,subcommand,problem_id,beta,iteration,elbo,reward_term,"
         "kl_term,wall_ms,seed\n";
  for (const RunRecord& r : records) {
    out << r.run_id << ',' << r.subcommand << ',' << r.problem_id << ','
        << (r.beta ? format_real(*r.beta) : "") << ',' << r.iteration << ','
        << format_real(r.elbo) << ',' << format_real(r.reward_term) << ','
        << format_real(r.kl_term) << ',' << r.wall_ms << ',' << r.seed.value
        << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace dvi
