#include "irksindy/features.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <set>
#include <utility>

namespace irksindy {

namespace {

std::string format_param(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// "x3" -> 2, validated against the dimension.
int parse_coord(const std::string& token, int dimension, const std::string& whole) {
  if (token.size() < 2 || token[0] != 'x')
    throw Error(Errc::MalformedFile, "cannot parse term '" + whole + "'");
  int idx = 0;
  auto [ptr, ec] = std::from_chars(token.data() + 1, token.data() + token.size(), idx);
  if (ec != std::errc() || ptr != token.data() + token.size() || idx < 1 || idx > dimension)
    throw Error(Errc::MalformedFile, "bad coordinate in term '" + whole + "'");
  return idx - 1;
}

double parse_double(const std::string& token, const std::string& whole) {
  try {
    std::size_t used = 0;
    double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::MalformedFile, "bad numeric parameter in term '" + whole + "'");
  }
}

// Nondecreasing index tuples of length `degree` in lexicographic order, which
// yields x1^2, x1*x2, x2^2 for d = 2.
void append_monomials(int dimension, int degree, std::vector<Term>& out) {
  std::vector<int> idx(static_cast<std::size_t>(degree), 0);
  while (true) {
    Term t;
    t.kind = TermKind::monomial;
    t.powers.assign(static_cast<std::size_t>(dimension), 0);
    for (int i : idx) ++t.powers[static_cast<std::size_t>(i)];
    out.push_back(std::move(t));

    int pos = degree - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == dimension - 1) --pos;
    if (pos < 0) break;
    const int next = idx[static_cast<std::size_t>(pos)] + 1;
    for (int k = pos; k < degree; ++k) idx[static_cast<std::size_t>(k)] = next;
  }
}

void append_unary(TermKind kind, std::vector<double> params, int dimension,
                  std::vector<Term>& out) {
  std::sort(params.begin(), params.end());
  for (double p : params)
    for (int i = 0; i < dimension; ++i) {
      Term t;
      t.kind = kind;
      t.coord = i;
      t.param = p;
      out.push_back(t);
    }
}

void validate(const LibrarySpec& spec) {
  if (spec.dimension < 1)
    throw Error(Errc::InvalidLibrarySpec, "dimension must be at least 1");
  if (spec.poly_degree < 0 || spec.poly_degree > kMaxPolyDegree)
    throw Error(Errc::InvalidLibrarySpec,
                "poly_degree must be in [0, " + std::to_string(kMaxPolyDegree) + "]");
  for (double f : spec.trig_frequencies)
    if (!(f > 0.0) || !std::isfinite(f))
      throw Error(Errc::InvalidLibrarySpec, "trig frequencies must be positive and finite");
  for (double r : spec.exp_rates)
    if (!std::isfinite(r)) throw Error(Errc::InvalidLibrarySpec, "exp rates must be finite");
}

}  // namespace

int Term::degree() const {
  int deg = 0;
  for (int p : powers) deg += p;
  return deg;
}

std::string term_name(const Term& term) {
  auto var = [](int i) { return "x" + std::to_string(i + 1); };
  auto scaled = [&](double p, int coord) {
    if (p == 1.0) return var(coord);
    if (p == -1.0) return "-" + var(coord);
    return format_param(p) + "*" + var(coord);
  };
  switch (term.kind) {
    case TermKind::constant: return "1";
    case TermKind::monomial: {
      std::string name;
      for (std::size_t i = 0; i < term.powers.size(); ++i) {
        const int p = term.powers[i];
        if (p == 0) continue;
        if (!name.empty()) name += "*";
        name += var(static_cast<int>(i));
        if (p > 1) name += "^" + std::to_string(p);
      }
      return name;
    }
    case TermKind::sine: return "sin(" + scaled(term.param, term.coord) + ")";
    case TermKind::cosine: return "cos(" + scaled(term.param, term.coord) + ")";
    case TermKind::exponential: return "exp(" + scaled(term.param, term.coord) + ")";
  }
  return {};
}

Term parse_term(const std::string& name, int dimension) {
  Term t;
  if (name == "1") return t;

  for (auto [prefix, kind] : {std::pair{"sin(", TermKind::sine}, std::pair{"cos(", TermKind::cosine},
                              std::pair{"exp(", TermKind::exponential}}) {
    const std::string pre = prefix;
    if (name.rfind(pre, 0) != 0) continue;
    if (name.back() != ')') throw Error(Errc::MalformedFile, "cannot parse term '" + name + "'");
    std::string inner = name.substr(pre.size(), name.size() - pre.size() - 1);
    t.kind = kind;
    const auto star = inner.find('*');
    if (star != std::string::npos) {
      t.param = parse_double(inner.substr(0, star), name);
      t.coord = parse_coord(inner.substr(star + 1), dimension, name);
    } else if (!inner.empty() && inner[0] == '-') {
      t.param = -1.0;
      t.coord = parse_coord(inner.substr(1), dimension, name);
    } else {
      t.param = 1.0;
      t.coord = parse_coord(inner, dimension, name);
    }
    return t;
  }

  t.kind = TermKind::monomial;
  t.powers.assign(static_cast<std::size_t>(dimension), 0);
  std::size_t start = 0;
  while (start <= name.size()) {
    auto end = name.find('*', start);
    if (end == std::string::npos) end = name.size();
    const std::string factor = name.substr(start, end - start);
    const auto caret = factor.find('^');
    int power = 1;
    std::string base = factor;
    if (caret != std::string::npos) {
      base = factor.substr(0, caret);
      const std::string ptxt = factor.substr(caret + 1);
      auto [ptr, ec] = std::from_chars(ptxt.data(), ptxt.data() + ptxt.size(), power);
      if (ec != std::errc() || ptr != ptxt.data() + ptxt.size() || power < 1)
        throw Error(Errc::MalformedFile, "bad power in term '" + name + "'");
    }
    t.powers[static_cast<std::size_t>(parse_coord(base, dimension, name))] += power;
    start = end + 1;
  }
  return t;
}

Library::Library(int dimension, std::vector<Term> terms) : dim_(dimension), terms_(std::move(terms)) {
  if (dim_ < 1) throw Error(Errc::InvalidLibrarySpec, "dimension must be at least 1");
  if (terms_.empty()) throw Error(Errc::EmptyLibrary, "library has no terms");
  std::set<std::string> seen;
  names_.reserve(terms_.size());
  for (const Term& t : terms_) {
    if (t.kind == TermKind::monomial && t.powers.size() != static_cast<std::size_t>(dim_))
      throw Error(Errc::InvalidLibrarySpec, "monomial powers do not match dimension");
    if (t.kind != TermKind::constant && t.kind != TermKind::monomial &&
        (t.coord < 0 || t.coord >= dim_))
      throw Error(Errc::InvalidLibrarySpec, "term coordinate out of range");
    names_.push_back(term_name(t));
    if (!seen.insert(names_.back()).second)
      throw Error(Errc::InvalidLibrarySpec, "duplicate term '" + names_.back() + "'");
  }
}

bool Library::is_polynomial() const {
  return std::all_of(terms_.begin(), terms_.end(), [](const Term& t) {
    return t.kind == TermKind::constant || t.kind == TermKind::monomial;
  });
}

Eigen::MatrixXd Library::evaluate_rows(const Eigen::MatrixXd& states) const {
  if (states.cols() != dim_)
    throw Error(Errc::DimensionMismatch, "state matrix has " + std::to_string(states.cols()) +
                                             " columns, library expects " + std::to_string(dim_));
  Eigen::MatrixXd out(states.rows(), size());
  for (Eigen::Index j = 0; j < size(); ++j) {
    const Term& t = terms_[static_cast<std::size_t>(j)];
    switch (t.kind) {
      case TermKind::constant: out.col(j).setOnes(); break;
      case TermKind::monomial:
        out.col(j).setOnes();
        for (int i = 0; i < dim_; ++i)
          for (int k = 0; k < t.powers[static_cast<std::size_t>(i)]; ++k)
            out.col(j).array() *= states.col(i).array();
        break;
      case TermKind::sine: out.col(j) = (t.param * states.col(t.coord)).array().sin(); break;
      case TermKind::cosine: out.col(j) = (t.param * states.col(t.coord)).array().cos(); break;
      case TermKind::exponential: out.col(j) = (t.param * states.col(t.coord)).array().exp(); break;
    }
  }
  return out;
}

Eigen::Index library_size(const LibrarySpec& spec) {
  validate(spec);
  // Monomials of degree exactly k in d variables: C(d + k - 1, k).
  Eigen::Index count = spec.include_constant ? 1 : 0;
  for (int k = 1; k <= spec.poly_degree; ++k) {
    long double c = 1;
    for (int i = 1; i <= k; ++i) c = c * (spec.dimension + k - i) / i;
    count += static_cast<Eigen::Index>(c + 0.5L);
  }
  const auto unary = static_cast<Eigen::Index>(spec.dimension);
  count += 2 * unary * static_cast<Eigen::Index>(spec.trig_frequencies.size());
  count += unary * static_cast<Eigen::Index>(spec.exp_rates.size());
  return count;
}

Library build_library(const LibrarySpec& spec) {
  validate(spec);
  std::vector<Term> terms;
  if (spec.include_constant) terms.emplace_back();
  for (int k = 1; k <= spec.poly_degree; ++k) append_monomials(spec.dimension, k, terms);
  append_unary(TermKind::sine, spec.trig_frequencies, spec.dimension, terms);
  append_unary(TermKind::cosine, spec.trig_frequencies, spec.dimension, terms);
  append_unary(TermKind::exponential, spec.exp_rates, spec.dimension, terms);
  if (terms.empty()) throw Error(Errc::EmptyLibrary, "library spec yields no terms");
  return Library(spec.dimension, std::move(terms));
}

}  // namespace irksindy
