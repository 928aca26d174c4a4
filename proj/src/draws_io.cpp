#include <fstream>
#include <map>

#include "json.hpp"
#include "ttop/csv.hpp"
#include "ttop/sampler.hpp"

namespace ttop {

void write_draws_csv(const std::filesystem::path& path, const PosteriorDraws& draws) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& n : draws.names) out << n << ',';
  out << "chain,iter\n";
  for (Index c = 0; c < draws.n_chains(); ++c)
    for (Index i = 0; i < draws.n_kept(); ++i) {
      for (Index p = 0; p < draws.n_params(); ++p) out << format_double(draws.chains[c](i, p)) << ',';
      out << c + 1 << ',' << i + 1 << '\n';
    }
}

PosteriorDraws read_draws_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open draws file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("draws file '" + path.string() + "' is empty");
  const auto header = split_row(line);
  if (header.size() < 3 || header[header.size() - 2] != "chain" || header.back() != "iter")
    throw ValidationError("draws file header must end with chain,iter");
  PosteriorDraws draws;
  for (std::size_t i = 0; i + 2 < header.size(); ++i) draws.names.emplace_back(header[i]);
  const auto n_params = static_cast<Index>(draws.names.size());

  std::map<int, std::vector<VectorXd>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_row(line);
    if (f.size() != header.size())
      throw ValidationError("draws line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " fields");
    VectorXd v(n_params);
    for (Index p = 0; p < n_params; ++p)
      if (!parse_number(f[p], v[p])) throw ValidationError("draws line " + std::to_string(line_no) + ": bad number");
    int chain = 0;
    if (!parse_number(f[n_params], chain)) throw ValidationError("draws line " + std::to_string(line_no) + ": bad chain");
    rows[chain].push_back(std::move(v));
  }
  if (rows.empty()) throw ValidationError("draws file has no rows");
  for (auto& [chain, r] : rows) {
    if (r.size() != rows.begin()->second.size()) throw ValidationError("chains in draws file have unequal lengths");
    MatrixXd m(static_cast<Index>(r.size()), n_params);
    for (std::size_t i = 0; i < r.size(); ++i) m.row(static_cast<Index>(i)) = r[i].transpose();
    draws.chains.push_back(std::move(m));
  }
  if (draws.n_chains() >= 2 && draws.n_kept() >= 4) {
    const auto r = rhat(draws);
    const auto e = ess(draws);
    for (std::size_t p = 0; p < r.size(); ++p)
      draws.diagnostics.push_back({r[p].rhat, e[p].ess, r[p].zero_variance || e[p].zero_variance});
  }
  return draws;
}

void write_diagnostics_json(const std::filesystem::path& path, const PosteriorDraws& draws) {
  nlohmann::ordered_json j;
  for (std::size_t p = 0; p < draws.diagnostics.size(); ++p) {
    const auto& d = draws.diagnostics[p];
    j[draws.names[p]] = {{"rhat", d.rhat}, {"ess", d.ess}, {"zero_variance", d.zero_variance}};
  }
  j["divergences"] = draws.divergences;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace ttop
