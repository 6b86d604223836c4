#include "lunmix/io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lunmix {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json matrix_rows(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError("parameter '" + name + "' must be a row-major matrix");
  int rows = static_cast<int>(j.size());
  int cols = static_cast<int>(j[0].size());
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != cols)
      throw ConfigError("parameter '" + name + "' has ragged rows");
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Vector vector_from(const json& j, const std::string& name) {
  if (!j.is_array()) throw ConfigError("parameter '" + name + "' must be an array");
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

}  // namespace

ordered_json params_to_json(const ModelParams& params) {
  ordered_json j;
  j["family"] = family_name(params.family.kind);
  if (params.family.has_hidden_states()) j["k"] = params.family.k;
  j["d"] = params.family.d;
  j["pi"] = ordered_json::array();
  for (int i = 0; i < params.pi.size(); ++i) j["pi"].push_back(params.pi(i));
  for (const auto& b : param_blocks(params.family)) {
    if (b.name == "pi") continue;
    const Matrix* m = nullptr;
    if (b.name == "B") m = &params.B;
    else if (b.name == "T") m = &params.T;
    else if (b.name == "T1") m = &params.T1;
    else if (b.name == "T2") m = &params.T2;
    else if (b.name == "O") m = &params.O;
    else if (b.name == "A") m = &params.A;
    else if (b.name == "A_left") m = &params.A_left;
    else if (b.name == "A_right") m = &params.A_right;
    if (m) j[b.name] = matrix_rows(*m);
  }
  return j;
}

ModelParams params_from_json(const json& j) {
  if (!j.contains("family")) throw ConfigError("parameter file lacks 'family'");
  ModelFamily fam;
  fam.kind = parse_family(j.at("family").get<std::string>());
  fam.d = j.at("d").get<int>();
  fam.k = fam.is_dependency() ? 0 : j.at("k").get<int>();
  ModelParams p;
  p.family = fam;
  for (const auto& b : param_blocks(fam)) {
    if (b.name == "pi") {
      if (fam.kind == FamilyKind::dep_ies && !j.contains("pi")) continue;
      p.pi = vector_from(j.at("pi"), "pi");
      continue;
    }
    const json& src = j.at(b.name);
    Matrix m = matrix_from(src, b.name);
    if (m.rows() != b.rows || m.cols() != b.cols) {
      std::ostringstream os;
      os << "parameter '" << b.name << "' has shape " << m.rows() << "x" << m.cols()
         << ", expected " << b.rows << "x" << b.cols;
      throw DimensionError(os.str());
    }
    if (b.name == "B") p.B = m;
    else if (b.name == "T") p.T = m;
    else if (b.name == "T1") p.T1 = m;
    else if (b.name == "T2") p.T2 = m;
    else if (b.name == "O") p.O = m;
    else if (b.name == "A") p.A = m;
    else if (b.name == "A_left") p.A_left = m;
    else if (b.name == "A_right") p.A_right = m;
  }
  if (fam.kind == FamilyKind::dep_ies && p.pi.size() == 0)
    p.pi = stationary_distribution(p.A);
  return p;
}

void save_params(const ModelParams& params, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  os << params_to_json(params).dump(2) << "\n";
}

ModelParams load_params(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path);
  json j = json::parse(is);
  return params_from_json(j);
}

std::vector<std::string> validate_params_report(const json& j) {
  std::vector<std::string> problems;
  ModelParams p;
  try {
    p = params_from_json(j);
  } catch (const std::exception& e) {
    problems.push_back(e.what());
    return problems;
  }
  try {
    p.validate();
  } catch (const std::exception& e) {
    problems.push_back(e.what());
  }
  return problems;
}

ordered_json moments_to_json(const MomentSet& mu) {
  ordered_json out;
  out["d"] = mu.d;
  out["observations"] = obs_family_name(mu.spec.family);
  if (!mu.spec.etas.empty()) {
    ordered_json etas;
    for (const auto& e : mu.spec.etas) {
      ordered_json v = ordered_json::array();
      for (int i = 0; i < e.v.size(); ++i) v.push_back(e.v(i));
      etas[e.tag] = std::move(v);
    }
    out["etas"] = std::move(etas);
  }
  ordered_json entries = ordered_json::array();
  for (int L : mu.lengths) {
    auto it = mu.ids.find(L);
    if (it == mu.ids.end()) continue;
    for (size_t i = 0; i < it->second.size(); ++i) {
      const ObsId& o = it->second[i];
      ordered_json entry;
      entry["L"] = L;
      entry["obs"] = o.name(mu.spec.etas);
      const Vector& flat = mu.flat(L, static_cast<int>(i));
      int d = mu.d;
      if (o.kind == ObsId::Kind::first) {
        ordered_json v = ordered_json::array();
        for (int a = 0; a < d; ++a) v.push_back(flat(a));
        entry["vector"] = std::move(v);
      } else if (o.kind == ObsId::Kind::triple) {
        ordered_json t = ordered_json::array();
        for (int a = 0; a < d; ++a) {
          ordered_json plane = ordered_json::array();
          for (int b = 0; b < d; ++b) {
            ordered_json row = ordered_json::array();
            for (int c = 0; c < d; ++c) row.push_back(flat((a * d + b) * d + c));
            plane.push_back(std::move(row));
          }
          t.push_back(std::move(plane));
        }
        entry["tensor"] = std::move(t);
      } else {
        ordered_json m = ordered_json::array();
        for (int a = 0; a < d; ++a) {
          ordered_json row = ordered_json::array();
          for (int b = 0; b < d; ++b) row.push_back(flat(a * d + b));
          m.push_back(std::move(row));
        }
        entry["matrix"] = std::move(m);
      }
      entries.push_back(std::move(entry));
    }
  }
  out["entries"] = std::move(entries);
  return out;
}

void save_corpus(const std::vector<Sentence>& corpus, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  for (const auto& s : corpus) {
    for (int i = 0; i < s.length(); ++i) {
      if (i > 0) os << ' ';
      os << s.words[i];
    }
    os << '\n';
  }
}

std::vector<Sentence> load_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path);
  std::vector<Sentence> corpus;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Sentence s;
    std::istringstream ls(line);
    int w;
    while (ls >> w) s.words.push_back(w);
    if (!s.words.empty()) corpus.push_back(std::move(s));
  }
  return corpus;
}

std::string format_sig(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

void write_mixing_csv(const MixingMatrix& m, std::ostream& os) {
  os << "row";
  for (const auto& label : m.col_labels) {
    std::string quoted = label;
    os << ",\"" << quoted << "\"";
  }
  os << "\n";
  for (int r = 0; r < m.rows(); ++r) {
    os << m.row_labels[r].first << ":" << m.row_labels[r].second;
    for (int c = 0; c < m.cols(); ++c) os << "," << format_sig(m.M(r, c));
    os << "\n";
  }
}

ordered_json mixing_registry_json(const MixingMatrix& m) {
  ordered_json out;
  out["rows"] = m.rows();
  out["cols"] = m.cols();
  ordered_json cols = ordered_json::array();
  for (const auto& c : m.col_labels) cols.push_back(c);
  out["columns"] = std::move(cols);
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < m.rows(); ++r) {
    ordered_json row;
    row["L"] = m.row_labels[r].first;
    row["obs"] = m.row_labels[r].second;
    row["denominator"] = m.row_denoms[r];
    ordered_json counts = ordered_json::array();
    for (const auto& [c, n] : m.rows_exact[r]) {
      ordered_json e;
      e["col"] = c;
      e["count"] = n;
      counts.push_back(std::move(e));
    }
    row["counts"] = std::move(counts);
    rows.push_back(std::move(row));
  }
  out["rows_exact"] = std::move(rows);
  return out;
}

ordered_json verdict_to_json(const IdentifiabilityVerdict& v) {
  ordered_json j;
  j["answer"] = answer_name(v.answer);
  j["rank"] = v.rank;
  j["n"] = v.n;
  j["m"] = v.m;
  j["draws"] = v.draws;
  j["per_draw_ranks"] = v.per_draw_ranks;
  ordered_json sv = ordered_json::array();
  int tail = std::min<int>(8, static_cast<int>(v.singular_values.size()));
  for (int i = static_cast<int>(v.singular_values.size()) - tail;
       i < static_cast<int>(v.singular_values.size()); ++i)
    if (i >= 0) sv.push_back(v.singular_values[i]);
  j["singular_value_tail"] = std::move(sv);
  j["gap_ratio"] = v.gap_ratio;
  j["seed"] = v.seed;
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

ordered_json match_report_to_json(const MatchReport& r) {
  ordered_json j;
  j["matched_error"] = r.matched_error;
  j["permutation"] = r.permutation;
  ordered_json blocks;
  for (const auto& [name, e] : r.blocks) {
    ordered_json b;
    b["max_abs"] = e.max_abs;
    b["frobenius"] = e.frobenius;
    blocks[name] = std::move(b);
  }
  j["blocks"] = std::move(blocks);
  return j;
}

ordered_json recovered_to_json(const RecoveredParams& rec) {
  ordered_json j;
  j["params"] = params_to_json(rec.params);
  j["raw_params"] = params_to_json(rec.raw_params);
  j["permutation_ambiguity"] = rec.permutation_ambiguity;
  ordered_json d;
  d["rowspace_residual"] = rec.diagnostics.rowspace_residual;
  d["decompose_min_sv"] = rec.diagnostics.decompose_min_sv;
  d["eigenvalue_separation"] = rec.diagnostics.eigenvalue_separation;
  d["imaginary_residue"] = rec.diagnostics.imaginary_residue;
  ordered_json eigs = ordered_json::array();
  for (const auto& e : rec.diagnostics.eigenvalues) {
    ordered_json c;
    c["re"] = e.real();
    c["im"] = e.imag();
    eigs.push_back(std::move(c));
  }
  d["eigenvalues"] = std::move(eigs);
  if (!rec.diagnostics.root_branches.empty())
    d["root_branches"] = rec.diagnostics.root_branches;
  if (rec.diagnostics.refit_residual >= 0)
    d["refit_residual"] = rec.diagnostics.refit_residual;
  if (!rec.diagnostics.eta_tag.empty()) d["eta"] = rec.diagnostics.eta_tag;
  j["diagnostics"] = std::move(d);
  return j;
}

}  // namespace lunmix
