#include "vpi/models.hpp"

#include <algorithm>

#include "vpi/error.hpp"

namespace vpi::models {

void three_dice(Context& ctx) {
  const Dist die = uniform_range(1, 6);
  const auto d1 = ctx.choose(die, "die1").as_int();
  const auto d2 = ctx.choose(die, "die2").as_int();
  const auto d3 = ctx.choose(die, "die3").as_int();
  ctx.set_hypothesis(d1 == 5);
  ctx.evidence(d1 + d2 + d3 == 7);
}

GuideProgram dice_perfect_guide() {
  GuideProgram g;
  g.propose = [](const ChoiceSite& site, GuideContext&) -> std::optional<Dist> {
    switch (site.index) {
      case 0:
        return Dist::from_weights(
            {{1, 1.0 / 3}, {2, 4.0 / 15}, {3, 1.0 / 5}, {4, 2.0 / 15}, {5, 1.0 / 15}});
      case 1:
        return uniform_range(1, 6 - site.history[0].as_int());
      case 2:
        return Dist::point(7 - site.history[0].as_int() - site.history[1].as_int());
      default:
        return std::nullopt;
    }
  };
  return g;
}

GuideProgram dice_hypothesis_guide() {
  GuideProgram g;
  g.propose = [](const ChoiceSite& site, GuideContext&) -> std::optional<Dist> {
    static constexpr std::int64_t kPath[] = {5, 1, 1};
    if (site.index < 3) return Dist::point(kPath[site.index]);
    return std::nullopt;
  };
  return g;
}

GuideFamily dice_family(FamilyKind kind, double mixing, std::optional<double> ceiling) {
  GuideFamily f;
  f.kind = kind;
  f.mixing = kind == FamilyKind::PointMass ? 0.0 : mixing;
  f.ceiling = ceiling;
  f.cells.push_back({"die1", 6});
  for (int v = 1; v <= 6; ++v) f.cells.push_back({"die2|die1=" + std::to_string(v), 6});
  f.site_key = [](const ChoiceSite& site) -> std::optional<std::string> {
    if (site.index == 0) return "die1";
    if (site.index == 1) return "die2|die1=" + site.history[0].to_string();
    return std::nullopt;
  };
  f.pinned = [](const ChoiceSite& site) -> std::optional<Dist> {
    if (site.index != 2) return std::nullopt;
    const auto rest = 7 - site.history[0].as_int() - site.history[1].as_int();
    if (rest < 1 || rest > 6) return std::nullopt;
    return Dist::point(rest);
  };
  return f;
}

// ---------------------------------------------------------------------------

std::vector<std::int64_t> parse_pattern(std::string_view text, int alphabet) {
  if (alphabet < 1 || alphabet > 26) throw InvalidArgumentError("alphabet must be in 1..26");
  std::vector<std::int64_t> out;
  out.reserve(text.size());
  for (char c : text) {
    const int code = c - 'a';
    if (code < 0 || code >= alphabet) {
      throw InvalidArgumentError(std::string("pattern letter '") + c + "' outside the alphabet");
    }
    out.push_back(code);
  }
  if (out.empty()) throw InvalidArgumentError("pattern must be non-empty");
  return out;
}

std::string format_pattern(std::span<const std::int64_t> pattern) {
  std::string s;
  for (auto c : pattern) s.push_back(static_cast<char>('a' + c));
  return s;
}

std::optional<std::int64_t> first_occurrence(std::span<const Value> text,
                                             std::span<const std::int64_t> pattern) {
  if (pattern.size() > text.size()) return std::nullopt;
  for (std::size_t start = 0; start + pattern.size() <= text.size(); ++start) {
    bool match = true;
    for (std::size_t j = 0; j < pattern.size() && match; ++j) {
      match = text[start + j].as_int() == pattern[j];
    }
    if (match) return static_cast<std::int64_t>(start);
  }
  return std::nullopt;
}

ModelProgram monkey_model(const MonkeyConfig& cfg) {
  return [cfg](Context& ctx) {
    const Dist letter = uniform_range(0, cfg.alphabet - 1);
    std::vector<Value> text;
    text.reserve(static_cast<std::size_t>(cfg.length));
    for (int i = 0; i < cfg.length; ++i) text.push_back(ctx.choose(letter));
    ctx.evidence(first_occurrence(text, cfg.pattern).has_value());
  };
}

GuideProgram monkey_position_guide(const MonkeyConfig& cfg) {
  GuideProgram g;
  const auto m = static_cast<std::int64_t>(cfg.pattern.size());
  if (m > cfg.length) return g;  // no position to choose; the prior it is
  g.propose = [cfg, m](const ChoiceSite& site, GuideContext& gctx) -> std::optional<Dist> {
    std::int64_t y;
    if (site.index == 0) {
      ExtraConditional first_match = [pattern = cfg.pattern](const Trace& t,
                                                             std::span<const Value>) {
        auto pos = first_occurrence(t.chosen_values(), pattern);
        return Dist::point(pos.value_or(-1));
      };
      y = gctx.extra_choice(uniform_range(0, cfg.length - m), std::move(first_match)).as_int();
    } else {
      y = site.extras[0].as_int();
    }
    const auto i = static_cast<std::int64_t>(site.index);
    if (i >= y && i < y + m) return Dist::point(cfg.pattern[static_cast<std::size_t>(i - y)]);
    return std::nullopt;
  };
  return g;
}

namespace {

// KMP automaton over states 0..m-1 (state m, a full match, is absorbing).
std::vector<std::vector<std::size_t>> pattern_automaton(const MonkeyConfig& cfg) {
  const auto& p = cfg.pattern;
  const std::size_t m = p.size();
  std::vector<std::size_t> fail(m, 0);
  for (std::size_t i = 1, k = 0; i < m; ++i) {
    while (k > 0 && p[i] != p[k]) k = fail[k - 1];
    if (p[i] == p[k]) ++k;
    fail[i] = k;
  }
  std::vector<std::vector<std::size_t>> delta(m, std::vector<std::size_t>(cfg.alphabet));
  for (std::size_t s = 0; s < m; ++s) {
    for (int c = 0; c < cfg.alphabet; ++c) {
      if (p[s] == c) {
        delta[s][c] = s + 1;
      } else {
        delta[s][c] = s == 0 ? 0 : delta[fail[s - 1]][c];
      }
    }
  }
  return delta;
}

}  // namespace

double monkey_exact_evidence(const MonkeyConfig& cfg) {
  const std::size_t m = cfg.pattern.size();
  if (static_cast<int>(m) > cfg.length) return 0.0;
  const auto delta = pattern_automaton(cfg);
  const double step = 1.0 / cfg.alphabet;
  std::vector<double> p(m, 0.0), next(m);
  p[0] = 1.0;
  double matched = 0.0;
  for (int t = 0; t < cfg.length; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < m; ++s) {
      if (p[s] == 0.0) continue;
      for (int c = 0; c < cfg.alphabet; ++c) {
        const auto to = delta[s][c];
        if (to == m) {
          matched += p[s] * step;
        } else {
          next[to] += p[s] * step;
        }
      }
    }
    p.swap(next);
  }
  return matched;
}

std::optional<std::uint64_t> monkey_count_with_pattern(const MonkeyConfig& cfg) {
  std::uint64_t total = 1;
  for (int i = 0; i < cfg.length; ++i) {
    if (__builtin_mul_overflow(total, static_cast<std::uint64_t>(cfg.alphabet), &total)) {
      return std::nullopt;
    }
  }
  const std::size_t m = cfg.pattern.size();
  if (static_cast<int>(m) > cfg.length) return 0;
  const auto delta = pattern_automaton(cfg);
  // Strings that have not yet matched, per automaton state.
  std::vector<std::uint64_t> n(m, 0), next(m);
  n[0] = 1;
  for (int t = 0; t < cfg.length; ++t) {
    std::fill(next.begin(), next.end(), 0);
    for (std::size_t s = 0; s < m; ++s) {
      for (int c = 0; c < cfg.alphabet; ++c) {
        if (delta[s][c] != m) next[delta[s][c]] += n[s];
      }
    }
    n.swap(next);
  }
  std::uint64_t never = 0;
  for (auto v : n) never += v;
  return total - never;
}

GuideFamily monkey_family(const MonkeyConfig& cfg, double mixing, std::optional<double> ceiling) {
  GuideFamily f;
  f.mixing = mixing;
  f.ceiling = ceiling;
  for (int i = 0; i < cfg.length; ++i) {
    f.cells.push_back({"pos" + std::to_string(i), static_cast<std::size_t>(cfg.alphabet)});
  }
  f.site_key = [](const ChoiceSite& site) -> std::optional<std::string> {
    return "pos" + std::to_string(site.index);
  };
  return f;
}

// ---------------------------------------------------------------------------

std::int64_t Expr::eval(std::int64_t x) const {
  switch (kind) {
    case Kind::Var:
      return x;
    case Kind::Const:
      return value;
    case Kind::Add:
      return left->eval(x) + right->eval(x);
    case Kind::Mul:
      return left->eval(x) * right->eval(x);
  }
  return 0;
}

std::string Expr::to_string() const {
  switch (kind) {
    case Kind::Var:
      return "x";
    case Kind::Const:
      return std::to_string(value);
    case Kind::Add:
      return "(" + left->to_string() + " + " + right->to_string() + ")";
    case Kind::Mul:
      return "(" + left->to_string() + " * " + right->to_string() + ")";
  }
  return "?";
}

int Expr::depth() const {
  if (!left) return 1;
  return 1 + std::max(left->depth(), right->depth());
}

Dist production_prior() {
  return Dist::from_weights({{Value::symbol("Var"), 0.3},
                             {Value::symbol("Const"), 0.3},
                             {Value::symbol("Add"), 0.2},
                             {Value::symbol("Mul"), 0.2}});
}

Dist terminal_prior() {
  return Dist::from_weights({{Value::symbol("Var"), 0.3}, {Value::symbol("Const"), 0.3}});
}

namespace {

std::unique_ptr<Expr> generate_at(Context& ctx, const std::string& path, int depth, int cap,
                                  const Dist& full, const Dist& terminal, const Dist& digits) {
  auto node = std::make_unique<Expr>();
  const Value prod = ctx.choose(depth >= cap ? terminal : full, "prod@" + path);
  const auto name = prod.as_symbol().name();
  if (name == "Var") {
    node->kind = Expr::Kind::Var;
  } else if (name == "Const") {
    node->kind = Expr::Kind::Const;
    node->value = ctx.choose(digits, "const@" + path).as_int();
  } else {
    node->kind = name == "Add" ? Expr::Kind::Add : Expr::Kind::Mul;
    node->left = generate_at(ctx, path + "L", depth + 1, cap, full, terminal, digits);
    node->right = generate_at(ctx, path + "R", depth + 1, cap, full, terminal, digits);
  }
  return node;
}

void add_cells(GuideFamily& f, const std::string& path, int depth, int cap) {
  f.cells.push_back({"prod@" + path, depth >= cap ? std::size_t{2} : std::size_t{4}});
  f.cells.push_back({"const@" + path, 10});
  if (depth < cap) {
    add_cells(f, path + "L", depth + 1, cap);
    add_cells(f, path + "R", depth + 1, cap);
  }
}

}  // namespace

std::unique_ptr<Expr> generate_expr(Context& ctx, int depth_cap) {
  static const Dist full = production_prior();
  static const Dist terminal = terminal_prior();
  static const Dist digits = uniform_range(0, 9);
  return generate_at(ctx, "r", 1, depth_cap, full, terminal, digits);
}

ModelProgram expr_induction_model(int depth_cap) {
  if (depth_cap < 2) throw InvalidArgumentError("depth cap must be >= 2");
  return [depth_cap](Context& ctx) {
    const auto f = generate_expr(ctx, depth_cap);
    ctx.evidence(f->eval(3) == 9);
    ctx.evidence(f->eval(4) == 16);
    const auto at5 = f->eval(5);
    ctx.set_hypothesis(at5 == 25);
    ctx.print(at5);
  };
}

GuideFamily expr_family(int depth_cap, double mixing, std::optional<double> ceiling) {
  GuideFamily f;
  f.mixing = mixing;
  f.ceiling = ceiling;
  add_cells(f, "r", 1, depth_cap);
  f.site_key = [](const ChoiceSite& site) -> std::optional<std::string> {
    if (!site.label) return std::nullopt;
    return std::string(site.label->name());
  };
  return f;
}

}  // namespace vpi::models
