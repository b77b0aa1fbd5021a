#include "mcnet/data/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "mcnet/core/errors.hpp"

namespace mcnet {

std::string_view modality_name(Modality s) { return s == Modality::Mri ? "mri" : "pet"; }

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Observed: return "observed";
    case Provenance::ImputedCs: return "imputed-cs";
    case Provenance::ImputedLg: return "imputed-lg";
    case Provenance::ImputedMixed: return "imputed-mixed";
  }
  return "observed";
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return std::string(s);
}

[[noreturn]] void fail(std::size_t line, const std::string& field, const std::string& msg) {
  throw ParseError("line " + std::to_string(line) + ", field '" + field + "': " + msg);
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<long> parse_int(std::string_view s) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

int parse_bit(std::string_view s, std::size_t line, const std::string& field) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  fail(line, field, "expected 0 or 1, got '" + std::string(s) + "'");
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, p);
}

bool bitwise_equal(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

Cohort read_cohort(std::istream& in, int visits) {
  if (visits < 1) throw SchemaError("visit grid must have at least one position");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("line 1: empty cohort file");
  std::vector<std::string> header;
  for (auto f : split_commas(line)) header.push_back(trim(f));
  bool has_provenance = !header.empty() && header.back() == "provenance";
  const std::size_t fixed_tail = has_provenance ? 3 : 2;
  if (header.size() < 4 + fixed_tail + 1) throw ParseError("line 1: header too short");
  const char* lead[] = {"subject_id", "visit_index", "modality", "mask"};
  for (int i = 0; i < 4; ++i)
    if (header[i] != lead[i]) fail(1, header[i], std::string("expected column '") + lead[i] + "'");
  const std::size_t dim = header.size() - 4 - fixed_tail;
  for (std::size_t j = 0; j < dim; ++j)
    if (header[4 + j] != "f" + std::to_string(j)) fail(1, header[4 + j], "expected column 'f" + std::to_string(j) + "'");
  if (header[4 + dim] != "y") fail(1, header[4 + dim], "expected column 'y'");
  if (header[5 + dim] != "c") fail(1, header[5 + dim], "expected column 'c'");

  Cohort cohort;
  cohort.visits = visits;
  cohort.dim = static_cast<int>(dim);
  std::map<std::string, std::size_t> index;
  // seen[subject][visit][modality]
  std::vector<std::vector<std::array<bool, 2>>> seen;
  std::vector<std::vector<int>> y_seen;

  std::size_t lineno = 1;
  long non_finite = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_commas(line);
    if (fields.size() != header.size())
      fail(lineno, "*", "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    const std::string id = trim(fields[0]);
    if (id.empty()) fail(lineno, "subject_id", "empty subject id");
    const auto visit = parse_int(trim(fields[1]));
    if (!visit) fail(lineno, "visit_index", "not an integer");
    if (*visit < 0 || *visit >= visits)
      throw SchemaError("line " + std::to_string(lineno) + ": visit_index " + std::to_string(*visit) +
                        " outside grid of " + std::to_string(visits));
    const std::string mod = trim(fields[2]);
    Modality s;
    if (mod == "mri")
      s = Modality::Mri;
    else if (mod == "pet")
      s = Modality::Pet;
    else
      fail(lineno, "modality", "expected 'mri' or 'pet', got '" + mod + "'");
    const int mask = parse_bit(trim(fields[3]), lineno, "mask");
    const int y = parse_bit(trim(fields[4 + dim]), lineno, "y");
    const int c = parse_bit(trim(fields[5 + dim]), lineno, "c");

    auto [it, inserted] = index.emplace(id, cohort.subjects.size());
    if (inserted) {
      SubjectRecord r;
      r.id = id;
      for (auto m : kModalities) {
        r.features(m) = Eigen::MatrixXd::Constant(visits, dim, std::numeric_limits<double>::quiet_NaN());
        r.mask(m) = Mask::Zero(visits);
      }
      r.y = Eigen::VectorXi::Zero(visits);
      r.c = c;
      cohort.subjects.push_back(std::move(r));
      seen.emplace_back(visits, std::array<bool, 2>{false, false});
      y_seen.emplace_back(visits, -1);
    }
    auto& rec = cohort.subjects[it->second];
    if (rec.c != c) fail(lineno, "c", "conversion label differs from earlier rows of subject '" + id + "'");
    auto& cell = seen[it->second][*visit][idx(s)];
    if (cell) throw SchemaError("line " + std::to_string(lineno) + ": duplicate (visit, modality) for subject '" + id + "'");
    cell = true;
    int& ys = y_seen[it->second][*visit];
    if (ys >= 0 && ys != y) fail(lineno, "y", "label differs between modality rows of the same visit");
    ys = y;
    rec.y(*visit) = y;
    rec.mask(s)(*visit) = mask == 1;
    for (std::size_t j = 0; j < dim; ++j) {
      const std::string tok = trim(fields[4 + j]);
      auto v = parse_double(tok);
      if (mask == 1) {
        if (!v) fail(lineno, header[4 + j], "present entry must be a number, got '" + tok + "'");
        if (!std::isfinite(*v)) ++non_finite;
      }
      rec.features(s)(*visit, static_cast<Eigen::Index>(j)) = v ? *v : std::numeric_limits<double>::quiet_NaN();
    }
  }
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i)
    for (int t = 0; t < visits; ++t)
      for (auto s : kModalities)
        if (!seen[i][t][idx(s)])
          throw SchemaError("subject '" + cohort.subjects[i].id + "' lacks a row for visit " + std::to_string(t) + " " +
                            std::string(modality_name(s)));
  if (non_finite > 0)
    cohort.warnings.push_back(std::to_string(non_finite) + " present entries are not finite");
  return cohort;
}

Cohort load_cohort(const std::string& path, int visits) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  return read_cohort(f, visits);
}

void write_cohort(std::ostream& out, const Cohort& cohort, const ProvenanceTable* provenance) {
  std::string buf = "subject_id,visit_index,modality,mask";
  for (int j = 0; j < cohort.dim; ++j) buf += ",f" + std::to_string(j);
  buf += ",y,c";
  if (provenance) buf += ",provenance";
  buf += '\n';
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const auto& r = cohort.subjects[i];
    for (int t = 0; t < cohort.visits; ++t) {
      for (auto s : kModalities) {
        buf += r.id;
        buf += ',' + std::to_string(t) + ',';
        buf += modality_name(s);
        buf += r.present(s, t) ? ",1" : ",0";
        for (int j = 0; j < cohort.dim; ++j) {
          buf += ',';
          append_double(buf, r.features(s)(t, j));
        }
        buf += ',' + std::to_string(r.y(t)) + ',' + std::to_string(r.c);
        if (provenance) {
          buf += ',';
          buf += provenance_name((*provenance)[i][t][idx(s)]);
        }
        buf += '\n';
      }
    }
    out << buf;
    buf.clear();
  }
}

void save_cohort(const std::string& path, const Cohort& cohort, const ProvenanceTable* provenance) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  write_cohort(f, cohort, provenance);
  if (!f) throw IoError("write failed for '" + path + "'");
}

bool same_records(const Cohort& a, const Cohort& b) {
  if (a.visits != b.visits || a.dim != b.dim || a.subjects.size() != b.subjects.size()) return false;
  for (std::size_t i = 0; i < a.subjects.size(); ++i) {
    const auto& p = a.subjects[i];
    const auto& q = b.subjects[i];
    if (p.id != q.id || p.c != q.c || p.y != q.y) return false;
    for (auto s : kModalities) {
      if (!(p.mask(s) == q.mask(s)).all()) return false;
      for (int t = 0; t < a.visits; ++t)
        if (!bitwise_equal(p.features(s).row(t), q.features(s).row(t))) return false;
    }
  }
  return true;
}

NormStats compute_norm_stats(const Cohort& cohort, const std::set<int>& training_folds,
                             std::vector<std::string>* warnings) {
  if (training_folds.empty()) throw ContractViolation("normalize: no training folds");
  if (cohort.folds.size() != cohort.subjects.size()) throw ContractViolation("normalize: folds not assigned");
  NormStats st;
  for (auto s : kModalities) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(cohort.dim);
    Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(cohort.dim);
    long n = 0;
    for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
      if (!training_folds.count(cohort.folds[i])) continue;
      const auto& r = cohort.subjects[i];
      for (int t = 0; t < cohort.visits; ++t) {
        if (!r.present(s, t)) continue;
        sum += r.features(s).row(t);
        ++n;
      }
    }
    if (n == 0) throw ContractViolation("normalize: no present training entries for " + std::string(modality_name(s)));
    Eigen::RowVectorXd mu = sum / double(n);
    for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
      if (!training_folds.count(cohort.folds[i])) continue;
      const auto& r = cohort.subjects[i];
      for (int t = 0; t < cohort.visits; ++t)
        if (r.present(s, t)) sq += (r.features(s).row(t) - mu).array().square().matrix();
    }
    Eigen::RowVectorXd sd = (sq / double(n)).array().sqrt().matrix();
    for (int j = 0; j < cohort.dim; ++j) {
      if (sd(j) < 1e-12) {
        sd(j) = 1.0;
        if (warnings)
          warnings->push_back("zero variance in " + std::string(modality_name(s)) + " feature f" + std::to_string(j) +
                              "; variance clamped to 1");
      }
    }
    st.mean[idx(s)] = mu;
    st.sd[idx(s)] = sd;
  }
  return st;
}

Cohort apply_normalization(const Cohort& cohort, const NormStats& stats) {
  Cohort out = cohort;
  for (auto& r : out.subjects)
    for (auto s : kModalities)
      for (int t = 0; t < out.visits; ++t)
        if (r.present(s, t))
          r.features(s).row(t) = ((r.features(s).row(t) - stats.mean[idx(s)]).array() / stats.sd[idx(s)].array()).matrix();
  out.norm = stats;
  return out;
}

Cohort normalize(const Cohort& cohort, const std::set<int>& training_folds) {
  std::vector<std::string> warnings;
  auto stats = compute_norm_stats(cohort, training_folds, &warnings);
  Cohort out = apply_normalization(cohort, stats);
  out.warnings.insert(out.warnings.end(), warnings.begin(), warnings.end());
  return out;
}

SplitAssignment split_stratified(const Cohort& cohort, std::uint64_t seed) {
  std::array<std::vector<int>, 2> by_class;
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) by_class[cohort.subjects[i].c].push_back(static_cast<int>(i));
  for (int c = 0; c < 2; ++c)
    if (by_class[c].size() < static_cast<std::size_t>(kFolds))
      throw SplitError("class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) + " subjects; need at least " +
                       std::to_string(kFolds));
  std::mt19937_64 rng(seed);
  SplitAssignment folds(cohort.subjects.size(), -1);
  // Dealing continues across classes so fold sizes also stay within one.
  int next = 0;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (int i : members) {
      folds[i] = next;
      next = (next + 1) % kFolds;
    }
  }
  return folds;
}

std::set<int> HoldOut::training_folds() const {
  std::set<int> s;
  for (int f = 0; f < kFolds; ++f)
    if (f != test_fold && f != validation_fold) s.insert(f);
  return s;
}

std::vector<int> HoldOut::indices(const SplitAssignment& folds, const std::set<int>& which) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < folds.size(); ++i)
    if (which.count(folds[i])) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace mcnet
