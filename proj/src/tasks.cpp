#include "treeball/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace treeball::tasks {

namespace {
constexpr int kGenerationRetries = 20000;

long long llgcd(long long a, long long b) {
    a = a < 0 ? -a : a;
    b = b < 0 ? -b : b;
    while (b) {
        long long t = a % b;
        a = b;
        b = t;
    }
    return a;
}
}  // namespace

const char* task_name(TaskId t) {
    switch (t) {
        case TaskId::G24: return "g24";
        case TaskId::NQueens: return "nqueens";
        case TaskId::GraphColoring: return "graphcoloring";
        case TaskId::Blocksworld: return "blocksworld";
        case TaskId::RuleChain: return "rulechain";
    }
    throw std::logic_error("task_name: bad TaskId");
}

TaskId task_from_name(const std::string& name) {
    if (name == "g24") return TaskId::G24;
    if (name == "nqueens") return TaskId::NQueens;
    if (name == "graphcoloring") return TaskId::GraphColoring;
    if (name == "blocksworld") return TaskId::Blocksworld;
    if (name == "rulechain") return TaskId::RuleChain;
    throw std::invalid_argument("unknown task: " + name);
}

Params default_params(TaskId t) {
    switch (t) {
        case TaskId::G24: return G24Params{};
        case TaskId::NQueens: return NqParams{};
        case TaskId::GraphColoring: return GcParams{};
        case TaskId::Blocksworld: return BwParams{};
        case TaskId::RuleChain: return RcParams{};
    }
    throw std::logic_error("default_params: bad TaskId");
}

int task_depth(TaskId t) {
    switch (t) {
        case TaskId::G24: return 3;
        case TaskId::NQueens: return 8;
        case TaskId::GraphColoring: return 8;
        case TaskId::Blocksworld: return 16;
        case TaskId::RuleChain: return 4;
    }
    throw std::logic_error("task_depth: bad TaskId");
}

// ---------------------------------------------------------------------------
// Rational

Rational::Rational(long long n) : num(n), den(1) {}

Rational::Rational(long long n, long long d) : num(n), den(d) {
    if (d == 0) throw std::domain_error("Rational: zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const long long g = llgcd(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

Rational Rational::operator+(const Rational& o) const {
    return Rational(num * o.den + o.num * den, den * o.den);
}
Rational Rational::operator-(const Rational& o) const {
    return Rational(num * o.den - o.num * den, den * o.den);
}
Rational Rational::operator*(const Rational& o) const {
    return Rational(num * o.num, den * o.den);
}
Rational Rational::operator/(const Rational& o) const {
    if (o.num == 0) throw std::domain_error("Rational: division by zero");
    return Rational(num * o.den, den * o.num);
}
bool Rational::operator<(const Rational& o) const {
    return static_cast<__int128>(num) * o.den < static_cast<__int128>(o.num) * den;
}

std::string Rational::str() const {
    if (den == 1) return std::to_string(num);
    return std::to_string(num) + "/" + std::to_string(den);
}

bool states_equal(const State& a, const State& b) {
    if (a.index() != b.index()) return false;
    return std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            return x == std::get<T>(b);
        },
        a);
}

// ---------------------------------------------------------------------------
// Game of 24

namespace g24 {

std::string render_operand(const Rational& r, bool right_side) {
    const std::string s = r.str();
    if (right_side && (r.num < 0 || r.den != 1)) return "(" + s + ")";
    return s;
}

std::string render_op(const Rational& a, const Rational& b, char op, const Rational& r) {
    return render_operand(a, false) + " " + op + " " + render_operand(b, true) + " = " +
           r.str();
}

std::vector<Operation> ops(const G24State& s) {
    std::map<std::string, G24Op> by_text;
    const auto add = [&](const Rational& a, const Rational& b, char op, const Rational& r) {
        std::string text = render_op(a, b, op, r);
        by_text.emplace(std::move(text), G24Op{a, b, r, op});
    };
    const size_t n = s.pool.size();
    std::set<std::pair<std::pair<long long, long long>, std::pair<long long, long long>>>
        seen_pairs;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            const Rational a = s.pool[i];  // a <= b: pool sorted
            const Rational b = s.pool[j];
            if (!seen_pairs.insert({{a.num, a.den}, {b.num, b.den}}).second) continue;
            add(a, b, '+', a + b);
            add(a, b, '*', a * b);
            add(b, a, '-', b - a);
            if (!(a == b)) add(a, b, '-', a - b);
            if (!b.is_zero()) add(a, b, '/', a / b);
            if (!a.is_zero() && !(a == b)) add(b, a, '/', b / a);
        }
    }
    std::vector<Operation> out;
    out.reserve(by_text.size());
    for (auto& [text, op] : by_text) out.push_back(Operation{op, text});
    return out;
}

G24State apply(const G24State& s, const G24Op& op) {
    std::vector<Rational> pool = s.pool;
    const auto take = [&pool](const Rational& v) {
        auto it = std::find(pool.begin(), pool.end(), v);
        if (it == pool.end())
            throw std::invalid_argument("g24: operand not in pool: " + v.str());
        pool.erase(it);
    };
    take(op.a);
    take(op.b);
    Rational expect;
    switch (op.op) {
        case '+': expect = op.a + op.b; break;
        case '-': expect = op.a - op.b; break;
        case '*': expect = op.a * op.b; break;
        case '/': expect = op.a / op.b; break;
        default: throw std::invalid_argument("g24: bad operator");
    }
    if (!(expect == op.result))
        throw std::invalid_argument("g24: stated result does not match");
    pool.push_back(op.result);
    std::sort(pool.begin(), pool.end());
    return G24State{std::move(pool)};
}

std::string prompt(const G24Data& d) {
    std::ostringstream os;
    os << "Use the numbers";
    for (const auto& v : d.operands) os << " " << v.str();
    os << " with the operations +, -, *, / to reach " << d.target.str()
       << ". Each step combines two numbers from the pool into one.";
    return os.str();
}

std::string pool_text(const std::vector<Rational>& pool) {
    std::ostringstream os;
    os << "{";
    for (size_t i = 0; i < pool.size(); ++i) {
        if (i) os << ", ";
        os << pool[i].str();
    }
    os << "}";
    return os.str();
}

}  // namespace g24

// ---------------------------------------------------------------------------
// N-Queens

namespace nq {

bool safe(const std::vector<int>& cols, int row, int col) {
    for (size_t r = 0; r < cols.size(); ++r) {
        const int pr = static_cast<int>(r) + 1;
        if (cols[r] == col) return false;
        if (std::abs(cols[r] - col) == row - pr) return false;
    }
    return true;
}

std::vector<Operation> ops(const NqData& d, const NqState& s) {
    std::vector<Operation> out;
    const int row = static_cast<int>(s.cols.size()) + 1;
    if (row > d.n) return out;
    for (int col = 1; col <= d.n; ++col) {
        if (!safe(s.cols, row, col)) continue;
        out.push_back(Operation{NqOp{row, col},
                                "row " + std::to_string(row) + ": col " + std::to_string(col)});
    }
    return out;  // already sorted: same prefix, single-digit col
}

bool solve(const NqData& d, std::vector<int>& cols) {
    if (static_cast<int>(cols.size()) == d.n) return true;
    const int row = static_cast<int>(cols.size()) + 1;
    for (int col = 1; col <= d.n; ++col) {
        if (!safe(cols, row, col)) continue;
        cols.push_back(col);
        if (solve(d, cols)) return true;
        cols.pop_back();
    }
    return false;
}

bool solvable_from(const NqData& d, const std::vector<int>& prefix) {
    std::vector<int> cols = prefix;
    return solve(d, cols);
}

}  // namespace nq

// ---------------------------------------------------------------------------
// Graph Coloring

namespace gc {

const char* kColorNames[] = {"R", "G", "B", "Y", "P", "O"};

std::vector<int> neighbors(const GcData& d, int v) {
    std::vector<int> out;
    for (const auto& [a, b] : d.edges) {
        if (a == v) out.push_back(b);
        if (b == v) out.push_back(a);
    }
    return out;
}

std::vector<Operation> ops(const GcData& d, const GcState& s) {
    std::vector<Operation> out;
    int v = -1;
    for (int i = 0; i < d.n; ++i) {
        if (s.colors[i] < 0) {
            v = i;
            break;
        }
    }
    if (v < 0) return out;
    std::vector<std::pair<std::string, GcOp>> cand;
    for (int k = 0; k < d.n_colors; ++k) {
        bool conflict = false;
        for (int u : neighbors(d, v)) {
            if (s.colors[u] == k) {
                conflict = true;
                break;
            }
        }
        if (conflict) continue;
        cand.emplace_back("V" + std::to_string(v) + " = " + kColorNames[k], GcOp{v, k});
    }
    std::sort(cand.begin(), cand.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [text, op] : cand) out.push_back(Operation{op, text});
    return out;
}

bool colorable(const GcData& d, std::vector<int>& colors, int v) {
    if (v == d.n) return true;
    for (int k = 0; k < d.n_colors; ++k) {
        bool conflict = false;
        for (int u : neighbors(d, v)) {
            if (colors[u] == k) {
                conflict = true;
                break;
            }
        }
        if (conflict) continue;
        colors[v] = k;
        if (colorable(d, colors, v + 1)) return true;
        colors[v] = -1;
    }
    return false;
}

}  // namespace gc

// ---------------------------------------------------------------------------
// Blocksworld

namespace bw {

bool is_clear(const BwState& s, int b) {
    if (s.holding == b) return false;
    for (int x = 0; x < static_cast<int>(s.under.size()); ++x)
        if (s.under[x] == b) return false;
    return true;
}

std::vector<Operation> ops(const BwData& d, const BwState& s) {
    std::vector<std::pair<std::string, BwOp>> cand;
    const int n = static_cast<int>(d.names.size());
    if (s.holding < 0) {
        for (int b = 0; b < n; ++b) {
            if (!is_clear(s, b)) continue;
            if (s.under[b] == -1) {
                cand.emplace_back("pick up " + d.names[b], BwOp{BwAction::PickUp, b});
            } else if (s.under[b] >= 0) {
                cand.emplace_back("unstack " + d.names[b] + " from " + d.names[s.under[b]],
                                  BwOp{BwAction::Unstack, b, s.under[b]});
            }
        }
    } else {
        const int h = s.holding;
        cand.emplace_back("put down " + d.names[h], BwOp{BwAction::PutDown, h});
        for (int t = 0; t < n; ++t) {
            if (t == h || !is_clear(s, t)) continue;
            cand.emplace_back("stack " + d.names[h] + " on " + d.names[t],
                              BwOp{BwAction::Stack, h, t});
        }
    }
    std::sort(cand.begin(), cand.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Operation> out;
    out.reserve(cand.size());
    for (auto& [text, op] : cand) out.push_back(Operation{op, text});
    return out;
}

BwState apply(const BwData&, const BwState& s, const BwOp& op) {
    BwState next = s;
    const auto fail = [&](const char* msg) {
        throw std::invalid_argument(std::string("blocksworld: ") + msg);
    };
    switch (op.action) {
        case BwAction::PickUp:
            if (s.holding >= 0) fail("hand not empty");
            if (s.under[op.block] != -1) fail("block not on table");
            if (!is_clear(s, op.block)) fail("block not clear");
            next.under[op.block] = -2;
            next.holding = op.block;
            break;
        case BwAction::PutDown:
            if (s.holding != op.block) fail("not holding block");
            next.under[op.block] = -1;
            next.holding = -1;
            break;
        case BwAction::Stack:
            if (s.holding != op.block) fail("not holding block");
            if (op.other < 0 || op.other == op.block) fail("bad stack target");
            if (!is_clear(s, op.other)) fail("target not clear");
            next.under[op.block] = op.other;
            next.holding = -1;
            break;
        case BwAction::Unstack:
            if (s.holding >= 0) fail("hand not empty");
            if (s.under[op.block] != op.other || op.other < 0) fail("block not on source");
            if (!is_clear(s, op.block)) fail("block not clear");
            next.under[op.block] = -2;
            next.holding = op.block;
            break;
    }
    return next;
}

bool goal_satisfied(const BwData& d, const BwState& s) {
    for (const auto& [above, below] : d.goal_on)
        if (s.under[above] != below) return false;
    return true;
}

std::vector<int> state_key(const BwState& s) {
    std::vector<int> k = s.under;
    k.push_back(s.holding);
    return k;
}

std::string predicates_text(const BwData& d, const BwState& s) {
    std::vector<std::string> preds;
    const int n = static_cast<int>(d.names.size());
    for (int b = 0; b < n; ++b) {
        if (s.under[b] == -1) preds.push_back("table(" + d.names[b] + ")");
        else if (s.under[b] >= 0)
            preds.push_back("on(" + d.names[b] + "," + d.names[s.under[b]] + ")");
    }
    for (int b = 0; b < n; ++b)
        if (is_clear(s, b)) preds.push_back("clear(" + d.names[b] + ")");
    if (s.holding >= 0) preds.push_back("holding(" + d.names[s.holding] + ")");
    else preds.push_back("hand-empty");
    std::sort(preds.begin(), preds.end());
    std::string out;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (i) out += ", ";
        out += preds[i];
    }
    return out;
}

// Uniform-ish random configuration: place blocks in random order, each on the
// table or on top of an existing stack.
std::vector<int> random_config(int n, Rng& rng) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<int> under(n, -1);
    std::vector<int> tops;
    for (int b : order) {
        const int choice = rng.uniform_int(static_cast<int>(tops.size()) + 1);
        if (choice == 0) {
            under[b] = -1;
        } else {
            under[b] = tops[choice - 1];
            tops[choice - 1] = b;
            continue;
        }
        tops.push_back(b);
    }
    return under;
}

}  // namespace bw

// ---------------------------------------------------------------------------
// Rule-chaining

namespace rc {

std::string rule_text(const std::vector<int>& body, int head) {
    std::string s = "if p" + std::to_string(body[0]);
    for (size_t i = 1; i < body.size(); ++i) s += " and p" + std::to_string(body[i]);
    s += " then p" + std::to_string(head);
    return s;
}

std::vector<Operation> ops(const RcData& d, const RcState& s) {
    std::vector<std::pair<std::string, RcOp>> cand;
    for (int i = 0; i < static_cast<int>(d.rules.size()); ++i) {
        const RcRule& r = d.rules[i];
        if (s.facts & (1u << r.head)) continue;
        bool ok = true;
        for (int b : r.body) {
            if (!(s.facts & (1u << b))) {
                ok = false;
                break;
            }
        }
        if (ok) cand.emplace_back(r.text, RcOp{i});
    }
    std::sort(cand.begin(), cand.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Operation> out;
    out.reserve(cand.size());
    for (auto& [text, op] : cand) out.push_back(Operation{op, text});
    return out;
}

std::string facts_text(uint32_t facts) {
    std::string out = "{";
    bool first = true;
    for (int i = 0; i < 32; ++i) {
        if (!(facts & (1u << i))) continue;
        if (!first) out += ", ";
        out += "p" + std::to_string(i);
        first = false;
    }
    return out + "}";
}

// Minimum forward-chaining steps to derive `goal`; -1 if underivable.
int min_steps_to(const RcData& d, uint32_t facts, int goal) {
    std::map<uint32_t, int> dist;
    std::deque<uint32_t> queue;
    dist[facts] = 0;
    queue.push_back(facts);
    while (!queue.empty()) {
        const uint32_t f = queue.front();
        queue.pop_front();
        const int dd = dist[f];
        if (f & (1u << goal)) return dd;
        for (const RcRule& r : d.rules) {
            if (f & (1u << r.head)) continue;
            bool ok = true;
            for (int b : r.body)
                if (!(f & (1u << b))) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            const uint32_t nf = f | (1u << r.head);
            if (dist.emplace(nf, dd + 1).second) queue.push_back(nf);
        }
    }
    return -1;
}

}  // namespace rc

// ---------------------------------------------------------------------------
// Engine dispatch

std::vector<Operation> admissible_ops(const ProblemInstance& inst, const State& s) {
    switch (inst.task) {
        case TaskId::G24: {
            const auto& st = std::get<G24State>(s);
            if (st.pool.size() < 2) return {};
            if (is_goal(inst, s)) return {};
            return g24::ops(st);
        }
        case TaskId::NQueens:
            return nq::ops(std::get<NqData>(inst.data), std::get<NqState>(s));
        case TaskId::GraphColoring:
            return gc::ops(std::get<GcData>(inst.data), std::get<GcState>(s));
        case TaskId::Blocksworld: {
            if (is_goal(inst, s)) return {};
            return bw::ops(std::get<BwData>(inst.data), std::get<BwState>(s));
        }
        case TaskId::RuleChain: {
            if (is_goal(inst, s)) return {};
            return rc::ops(std::get<RcData>(inst.data), std::get<RcState>(s));
        }
    }
    throw std::logic_error("admissible_ops: bad task");
}

State apply(const ProblemInstance& inst, const State& s, const Operation& op) {
    switch (inst.task) {
        case TaskId::G24:
            return g24::apply(std::get<G24State>(s), std::get<G24Op>(op.data));
        case TaskId::NQueens: {
            const auto& st = std::get<NqState>(s);
            const auto& o = std::get<NqOp>(op.data);
            const auto& d = std::get<NqData>(inst.data);
            if (o.row != static_cast<int>(st.cols.size()) + 1 || o.row > d.n)
                throw std::invalid_argument("nqueens: wrong row");
            if (o.col < 1 || o.col > d.n || !nq::safe(st.cols, o.row, o.col))
                throw std::invalid_argument("nqueens: unsafe column");
            NqState next = st;
            next.cols.push_back(o.col);
            return next;
        }
        case TaskId::GraphColoring: {
            const auto& st = std::get<GcState>(s);
            const auto& o = std::get<GcOp>(op.data);
            const auto& d = std::get<GcData>(inst.data);
            int expect = -1;
            for (int i = 0; i < d.n; ++i)
                if (st.colors[i] < 0) {
                    expect = i;
                    break;
                }
            if (o.vertex != expect)
                throw std::invalid_argument("graphcoloring: vertex out of order");
            if (o.color < 0 || o.color >= d.n_colors)
                throw std::invalid_argument("graphcoloring: bad color");
            for (int u : gc::neighbors(d, o.vertex))
                if (st.colors[u] == o.color)
                    throw std::invalid_argument("graphcoloring: conflicting color");
            GcState next = st;
            next.colors[o.vertex] = o.color;
            return next;
        }
        case TaskId::Blocksworld:
            return bw::apply(std::get<BwData>(inst.data), std::get<BwState>(s),
                             std::get<BwOp>(op.data));
        case TaskId::RuleChain: {
            const auto& st = std::get<RcState>(s);
            const auto& o = std::get<RcOp>(op.data);
            const auto& d = std::get<RcData>(inst.data);
            if (o.rule_index < 0 || o.rule_index >= static_cast<int>(d.rules.size()))
                throw std::invalid_argument("rulechain: bad rule index");
            const RcRule& r = d.rules[o.rule_index];
            if (st.facts & (1u << r.head))
                throw std::invalid_argument("rulechain: head already derived");
            for (int b : r.body)
                if (!(st.facts & (1u << b)))
                    throw std::invalid_argument("rulechain: body not satisfied");
            return RcState{st.facts | (1u << r.head)};
        }
    }
    throw std::logic_error("apply: bad task");
}

bool is_goal(const ProblemInstance& inst, const State& s) {
    switch (inst.task) {
        case TaskId::G24: {
            const auto& st = std::get<G24State>(s);
            const auto& d = std::get<G24Data>(inst.data);
            return st.pool.size() == 1 && st.pool[0] == d.target;
        }
        case TaskId::NQueens: {
            const auto& st = std::get<NqState>(s);
            const auto& d = std::get<NqData>(inst.data);
            if (static_cast<int>(st.cols.size()) != d.n) return false;
            for (size_t r = 0; r < st.cols.size(); ++r) {
                std::vector<int> before(st.cols.begin(), st.cols.begin() + r);
                if (!nq::safe(before, static_cast<int>(r) + 1, st.cols[r])) return false;
            }
            return true;
        }
        case TaskId::GraphColoring: {
            const auto& st = std::get<GcState>(s);
            const auto& d = std::get<GcData>(inst.data);
            for (int c : st.colors)
                if (c < 0) return false;
            for (const auto& [u, v] : d.edges)
                if (st.colors[u] == st.colors[v]) return false;
            return true;
        }
        case TaskId::Blocksworld:
            return bw::goal_satisfied(std::get<BwData>(inst.data), std::get<BwState>(s));
        case TaskId::RuleChain: {
            const auto& d = std::get<RcData>(inst.data);
            return (std::get<RcState>(s).facts >> d.goal_fact) & 1u;
        }
    }
    throw std::logic_error("is_goal: bad task");
}

// ---------------------------------------------------------------------------
// Features

namespace {
// Monotone squash keeping arbitrarily large pool values distinct.
double squash(double v) { return std::asinh(v) / 4.0; }
}  // namespace

int feature_dim(TaskId task) {
    switch (task) {
        case TaskId::G24: return 6;          // 4 pool slots + target + step count
        case TaskId::NQueens: return 10;     // 8 column slots + count + N
        case TaskId::GraphColoring: return 37;  // 28 edge bits + 8 colors + n
        case TaskId::Blocksworld: return 12;    // 5 support + 5 goal + holding + n
        case TaskId::RuleChain: return 32;      // 16 fact bits + 16 goal one-hot
    }
    throw std::logic_error("feature_dim: bad task");
}

Vec featurize(const ProblemInstance& inst, const State& s) {
    Vec f;
    switch (inst.task) {
        case TaskId::G24: {
            const auto& st = std::get<G24State>(s);
            const auto& d = std::get<G24Data>(inst.data);
            f.assign(6, 0.0);
            for (size_t i = 0; i < st.pool.size() && i < 4; ++i)
                f[i] = squash(st.pool[i].to_double());
            f[4] = squash(d.target.to_double());
            f[5] = static_cast<double>(d.operands.size() - st.pool.size()) / 3.0;
            break;
        }
        case TaskId::NQueens: {
            const auto& st = std::get<NqState>(s);
            const auto& d = std::get<NqData>(inst.data);
            f.assign(10, 0.0);
            for (size_t i = 0; i < st.cols.size() && i < 8; ++i)
                f[i] = static_cast<double>(st.cols[i]) / 8.0;
            f[8] = static_cast<double>(st.cols.size()) / 8.0;
            f[9] = static_cast<double>(d.n) / 8.0;
            break;
        }
        case TaskId::GraphColoring: {
            const auto& st = std::get<GcState>(s);
            const auto& d = std::get<GcData>(inst.data);
            f.assign(37, 0.0);
            for (const auto& [u, v] : d.edges) {
                const int idx = u * 8 - u * (u + 1) / 2 + (v - u - 1);  // upper triangle of 8x8
                f[idx] = 1.0;
            }
            for (int i = 0; i < d.n; ++i)
                f[28 + i] = static_cast<double>(st.colors[i] + 1) / 3.0;
            f[36] = static_cast<double>(d.n) / 8.0;
            break;
        }
        case TaskId::Blocksworld: {
            const auto& st = std::get<BwState>(s);
            const auto& d = std::get<BwData>(inst.data);
            const int n = static_cast<int>(d.names.size());
            f.assign(12, 0.0);
            for (int b = 0; b < n && b < 5; ++b) {
                double code;
                if (st.under[b] == -1) code = 1.0;       // table
                else if (st.under[b] == -2) code = 2.0;  // in hand
                else code = 3.0 + st.under[b];
                f[b] = code / 8.0;
            }
            for (const auto& [above, below] : d.goal_on)
                if (above < 5) f[5 + above] = (3.0 + below) / 8.0;
            f[10] = static_cast<double>(st.holding + 1) / 8.0;
            f[11] = static_cast<double>(n) / 8.0;
            break;
        }
        case TaskId::RuleChain: {
            const auto& st = std::get<RcState>(s);
            const auto& d = std::get<RcData>(inst.data);
            f.assign(32, 0.0);
            for (int i = 0; i < 16; ++i)
                if (st.facts & (1u << i)) f[i] = 1.0;
            f[16 + d.goal_fact] = 1.0;
            break;
        }
    }
    return f;
}

int op_feature_dim(TaskId task) {
    switch (task) {
        case TaskId::G24: return 7;
        case TaskId::NQueens: return 2;
        case TaskId::GraphColoring: return 4;
        case TaskId::Blocksworld: return 6;
        case TaskId::RuleChain: return 32;
    }
    throw std::logic_error("op_feature_dim: bad task");
}

Vec op_features(const ProblemInstance& inst, const Operation& op) {
    Vec f;
    switch (inst.task) {
        case TaskId::G24: {
            const auto& o = std::get<G24Op>(op.data);
            f.assign(7, 0.0);
            f[0] = squash(o.a.to_double());
            f[1] = squash(o.b.to_double());
            f[2] = o.op == '+' ? 1.0 : 0.0;
            f[3] = o.op == '-' ? 1.0 : 0.0;
            f[4] = o.op == '*' ? 1.0 : 0.0;
            f[5] = o.op == '/' ? 1.0 : 0.0;
            f[6] = squash(o.result.to_double());
            break;
        }
        case TaskId::NQueens: {
            const auto& o = std::get<NqOp>(op.data);
            f = {static_cast<double>(o.row) / 8.0, static_cast<double>(o.col) / 8.0};
            break;
        }
        case TaskId::GraphColoring: {
            const auto& o = std::get<GcOp>(op.data);
            f.assign(4, 0.0);
            f[0] = static_cast<double>(o.vertex) / 8.0;
            f[1 + o.color] = 1.0;
            break;
        }
        case TaskId::Blocksworld: {
            const auto& o = std::get<BwOp>(op.data);
            f.assign(6, 0.0);
            f[static_cast<int>(o.action)] = 1.0;
            f[4] = static_cast<double>(o.block + 1) / 8.0;
            f[5] = static_cast<double>(o.other + 1) / 8.0;
            break;
        }
        case TaskId::RuleChain: {
            const auto& o = std::get<RcOp>(op.data);
            const auto& d = std::get<RcData>(inst.data);
            const RcRule& r = d.rules[o.rule_index];
            f.assign(32, 0.0);
            for (int b : r.body) f[b] = 1.0;
            f[16 + r.head] = 1.0;
            break;
        }
    }
    return f;
}

// ---------------------------------------------------------------------------
// Rendering

std::string state_text(const ProblemInstance& inst, const State& s) {
    switch (inst.task) {
        case TaskId::G24:
            return "pool " + g24::pool_text(std::get<G24State>(s).pool);
        case TaskId::NQueens: {
            const auto& st = std::get<NqState>(s);
            std::string out = "[";
            for (size_t i = 0; i < st.cols.size(); ++i) {
                if (i) out += ",";
                out += std::to_string(st.cols[i]);
            }
            return out + "]";
        }
        case TaskId::GraphColoring: {
            const auto& st = std::get<GcState>(s);
            std::string out;
            for (size_t i = 0; i < st.colors.size(); ++i) {
                if (i) out += " ";
                out += "V" + std::to_string(i) + "=";
                out += st.colors[i] < 0 ? "-" : gc::kColorNames[st.colors[i]];
            }
            return out;
        }
        case TaskId::Blocksworld:
            return bw::predicates_text(std::get<BwData>(inst.data), std::get<BwState>(s));
        case TaskId::RuleChain:
            return "facts " + rc::facts_text(std::get<RcState>(s).facts);
    }
    throw std::logic_error("state_text: bad task");
}

std::string render_answer(const Trace& trace) {
    std::string out;
    for (size_t i = 0; i < trace.ops.size(); ++i) {
        if (i) out += "\n";
        out += trace.ops[i].text;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reference solvers

namespace {

bool dfs_solve(const ProblemInstance& inst, const State& s, int depth_left, Trace& trace) {
    if (is_goal(inst, s)) return true;
    if (depth_left == 0) return false;
    for (const Operation& op : admissible_ops(inst, s)) {
        State child = apply(inst, s, op);
        trace.ops.push_back(op);
        trace.states.push_back(child);
        if (dfs_solve(inst, child, depth_left - 1, trace)) return true;
        trace.ops.pop_back();
        trace.states.pop_back();
    }
    return false;
}

template <typename Key>
Trace bfs_solve(const ProblemInstance& inst, const State& init,
                Key (*key_of)(const ProblemInstance&, const State&)) {
    struct Entry {
        State state;
        int parent;
        int op_index;  // index into ops list of parent entry
        std::vector<Operation> ops;
    };
    std::vector<Entry> entries;
    std::map<Key, int> seen;
    entries.push_back(Entry{init, -1, -1, {}});
    seen[key_of(inst, init)] = 0;
    for (size_t head = 0; head < entries.size(); ++head) {
        // Careful: entries grows; do not hold references across push_back.
        if (is_goal(inst, entries[head].state)) {
            std::vector<int> chain;
            int at = static_cast<int>(head);
            while (entries[at].parent >= 0) {
                chain.push_back(at);
                at = entries[at].parent;
            }
            std::reverse(chain.begin(), chain.end());
            Trace t;
            t.states.push_back(init);
            for (int id : chain) {
                t.ops.push_back(entries[entries[id].parent].ops[entries[id].op_index]);
                t.states.push_back(entries[id].state);
            }
            t.success = true;
            return t;
        }
        entries[head].ops = admissible_ops(inst, entries[head].state);
        const size_t nops = entries[head].ops.size();
        for (size_t i = 0; i < nops; ++i) {
            State child = apply(inst, entries[head].state, entries[head].ops[i]);
            Key k = key_of(inst, child);
            if (seen.emplace(std::move(k), static_cast<int>(entries.size())).second)
                entries.push_back(Entry{std::move(child), static_cast<int>(head),
                                        static_cast<int>(i), {}});
        }
    }
    throw UnsolvableError("bfs_solve: no trace reaches the goal");
}

std::vector<int> bw_key(const ProblemInstance&, const State& s) {
    return bw::state_key(std::get<BwState>(s));
}
uint32_t rc_key(const ProblemInstance&, const State& s) {
    return std::get<RcState>(s).facts;
}

}  // namespace

Trace reference_solver(const ProblemInstance& inst) {
    switch (inst.task) {
        case TaskId::G24:
        case TaskId::NQueens:
        case TaskId::GraphColoring: {
            Trace t;
            t.states.push_back(inst.init_state);
            if (!dfs_solve(inst, inst.init_state, task_depth(inst.task), t))
                throw UnsolvableError(std::string("reference_solver: unsolvable ") +
                                      task_name(inst.task) + " instance");
            t.success = true;
            return t;
        }
        case TaskId::Blocksworld:
            return bfs_solve<std::vector<int>>(inst, inst.init_state, &bw_key);
        case TaskId::RuleChain:
            return bfs_solve<uint32_t>(inst, inst.init_state, &rc_key);
    }
    throw std::logic_error("reference_solver: bad task");
}

// ---------------------------------------------------------------------------
// Instance construction

namespace {

void finalize_instance(ProblemInstance& inst) {
    inst.init_state_text = state_text(inst, inst.init_state);
    inst.answer_label = render_answer(reference_solver(inst));
}

}  // namespace

ProblemInstance make_g24_instance(const std::vector<Rational>& operands, Rational target) {
    ProblemInstance inst;
    inst.task = TaskId::G24;
    inst.params = G24Params{};
    G24Data d;
    d.operands = operands;
    std::sort(d.operands.begin(), d.operands.end());
    d.target = target;
    inst.init_state = G24State{d.operands};
    inst.prompt = g24::prompt(d);
    inst.data = std::move(d);
    finalize_instance(inst);
    return inst;
}

ProblemInstance make_g24_instance(const std::vector<long long>& operands, long long target) {
    std::vector<Rational> ops;
    ops.reserve(operands.size());
    for (long long v : operands) ops.emplace_back(v);
    return make_g24_instance(ops, Rational(target));
}

ProblemInstance make_nq_instance(int n, const std::vector<int>& prefix) {
    if (n < 4 || n > 8) throw std::invalid_argument("make_nq_instance: n must be 4..8");
    ProblemInstance inst;
    inst.task = TaskId::NQueens;
    inst.params = NqParams{n, 0, static_cast<int>(prefix.size())};
    NqData d;
    d.n = n;
    d.prefix = prefix;
    inst.init_state = NqState{prefix};
    std::ostringstream os;
    os << "Place " << n << " queens on a " << n << "x" << n
       << " board so that no two queens attack each other, filling one row per step.";
    if (!prefix.empty()) {
        os << " Rows 1.." << prefix.size() << " already hold queens in columns [";
        for (size_t i = 0; i < prefix.size(); ++i) {
            if (i) os << ",";
            os << prefix[i];
        }
        os << "].";
    } else {
        os << " The board starts empty.";
    }
    inst.prompt = os.str();
    inst.data = std::move(d);
    finalize_instance(inst);
    return inst;
}

ProblemInstance make_gc_instance(int n, const std::vector<std::pair<int, int>>& edges,
                                 int n_colors) {
    ProblemInstance inst;
    inst.task = TaskId::GraphColoring;
    inst.params = GcParams{{n}, {}, n_colors};
    GcData d;
    d.n = n;
    d.n_colors = n_colors;
    d.edges = edges;
    for (auto& [u, v] : d.edges)
        if (u > v) std::swap(u, v);
    std::sort(d.edges.begin(), d.edges.end());
    d.edges.erase(std::unique(d.edges.begin(), d.edges.end()), d.edges.end());
    inst.init_state = GcState{std::vector<int>(n, -1)};
    std::ostringstream os;
    os << "Color the vertices V0..V" << n - 1 << " with colors";
    for (int k = 0; k < n_colors; ++k) os << (k ? ", " : " ") << gc::kColorNames[k];
    os << " so that adjacent vertices receive different colors, one vertex per step in "
          "index order. Edges:";
    for (size_t i = 0; i < d.edges.size(); ++i)
        os << (i ? ", (" : " (") << "V" << d.edges[i].first << ",V" << d.edges[i].second
           << ")";
    os << ".";
    inst.prompt = os.str();
    inst.data = std::move(d);
    finalize_instance(inst);
    return inst;
}

ProblemInstance make_bw_instance(const std::vector<std::string>& names,
                                 const std::vector<int>& init_under,
                                 const std::vector<std::pair<int, int>>& goal_on) {
    ProblemInstance inst;
    inst.task = TaskId::Blocksworld;
    inst.params = BwParams{};
    BwData d;
    d.names = names;
    d.init_under = init_under;
    d.goal_on = goal_on;
    std::sort(d.goal_on.begin(), d.goal_on.end());
    BwState s;
    s.under = init_under;
    s.holding = -1;
    inst.init_state = s;
    std::ostringstream os;
    os << "Blocks:";
    for (size_t i = 0; i < names.size(); ++i) os << (i ? ", " : " ") << names[i];
    os << ". Initial state: " << bw::predicates_text(d, s) << ". Goal:";
    for (size_t i = 0; i < d.goal_on.size(); ++i)
        os << (i ? ", " : " ") << names[d.goal_on[i].first] << " on "
           << names[d.goal_on[i].second];
    os << ". Actions: pick up, put down, stack, unstack.";
    inst.prompt = os.str();
    inst.data = std::move(d);
    finalize_instance(inst);
    return inst;
}

ProblemInstance make_rc_instance(const std::vector<RcRule>& rules, uint32_t init_facts,
                                 int goal_fact, int n_steps) {
    ProblemInstance inst;
    inst.task = TaskId::RuleChain;
    inst.params = RcParams{};
    RcData d;
    d.rules = rules;
    for (RcRule& r : d.rules) {
        std::sort(r.body.begin(), r.body.end());
        r.text = rc::rule_text(r.body, r.head);
    }
    d.init_facts = init_facts;
    d.goal_fact = goal_fact;
    d.n_steps = n_steps;
    inst.init_state = RcState{init_facts};
    std::ostringstream os;
    os << "Facts: " << rc::facts_text(init_facts) << ". Rules:";
    for (size_t i = 0; i < d.rules.size(); ++i) os << (i ? "; " : " ") << d.rules[i].text;
    os << ". Derive p" << goal_fact << " by applying one rule per step.";
    inst.prompt = os.str();
    inst.data = std::move(d);
    finalize_instance(inst);
    return inst;
}

// ---------------------------------------------------------------------------
// Generators

namespace {

// Enumerates the (child-merged) Game-of-24 tree and counts successful leaves
// plus distinct solution schemas (multisets of step renderings).
struct G24SolutionCount {
    int success_leaves = 0;
    std::set<std::string> schemas;
};

void g24_count(const ProblemInstance& inst, const G24State& s,
               std::vector<std::string>& path, G24SolutionCount& out) {
    if (is_goal(inst, State{s})) {
        ++out.success_leaves;
        std::vector<std::string> sorted = path;
        std::sort(sorted.begin(), sorted.end());
        std::string key;
        for (const auto& t : sorted) key += t + "\n";
        out.schemas.insert(std::move(key));
        return;
    }
    std::vector<G24State> children;
    std::vector<std::string> texts;
    for (const Operation& op : admissible_ops(inst, State{s})) {
        G24State child = g24::apply(s, std::get<G24Op>(op.data));
        bool dup = false;
        for (const G24State& c : children)
            if (c == child) {
                dup = true;
                break;
            }
        if (dup) continue;
        children.push_back(std::move(child));
        texts.push_back(op.text);
    }
    for (size_t i = 0; i < children.size(); ++i) {
        path.push_back(texts[i]);
        g24_count(inst, children[i], path, out);
        path.pop_back();
    }
}

ProblemInstance generate_g24(const G24Params& p, uint64_t seed) {
    Rng rng(seed);
    for (int attempt = 0; attempt < kGenerationRetries; ++attempt) {
        std::vector<long long> vals(p.n_operands);
        for (auto& v : vals)
            v = p.min_operand + rng.uniform_int(p.max_operand - p.min_operand + 1);
        std::sort(vals.begin(), vals.end());
        ProblemInstance inst;
        inst.task = TaskId::G24;
        G24Data d;
        for (long long v : vals) d.operands.emplace_back(v);
        d.target = Rational(p.target);
        inst.init_state = G24State{d.operands};
        inst.data = d;
        G24SolutionCount count;
        std::vector<std::string> path;
        g24_count(inst, G24State{d.operands}, path, count);
        const int n_schemas = static_cast<int>(count.schemas.size());
        if (count.success_leaves == 0 || n_schemas > p.max_solutions) continue;
        ProblemInstance full = make_g24_instance(d.operands, d.target);
        full.params = p;
        full.seed = seed;
        return full;
    }
    throw GenerationError("generate_g24: retry budget exhausted");
}

ProblemInstance generate_nq(const NqParams& p, uint64_t seed) {
    Rng rng(seed);
    if (p.n < 4 || p.n > 8) throw std::invalid_argument("generate_nq: n must be 4..8");
    const int k = p.prefix_min + rng.uniform_int(p.prefix_max - p.prefix_min + 1);
    NqData d;
    d.n = p.n;
    std::vector<int> prefix;
    for (int row = 1; row <= k; ++row) {
        std::vector<int> options;
        for (int col = 1; col <= p.n; ++col) {
            if (!nq::safe(prefix, row, col)) continue;
            prefix.push_back(col);
            if (nq::solvable_from(d, prefix)) options.push_back(col);
            prefix.pop_back();
        }
        if (options.empty())
            throw GenerationError("generate_nq: no extendable column");  // unreachable
        prefix.push_back(options[rng.uniform_int(static_cast<int>(options.size()))]);
    }
    ProblemInstance inst = make_nq_instance(p.n, prefix);
    inst.params = p;
    inst.seed = seed;
    return inst;
}

ProblemInstance generate_gc(const GcParams& p, uint64_t seed) {
    Rng rng(seed);
    for (int attempt = 0; attempt < kGenerationRetries; ++attempt) {
        const int n = p.n_choices[rng.uniform_int(static_cast<int>(p.n_choices.size()))];
        const double prob =
            p.p_choices.empty()
                ? 0.5
                : p.p_choices[rng.uniform_int(static_cast<int>(p.p_choices.size()))];
        std::vector<std::pair<int, int>> edges;
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (rng.uniform() < prob) edges.emplace_back(u, v);
        if (static_cast<int>(edges.size()) < n - 1) continue;
        GcData d;
        d.n = n;
        d.n_colors = p.n_colors;
        d.edges = edges;
        std::vector<int> colors(n, -1);
        if (!gc::colorable(d, colors, 0)) continue;
        ProblemInstance inst = make_gc_instance(n, edges, p.n_colors);
        inst.params = p;
        inst.seed = seed;
        return inst;
    }
    throw GenerationError("generate_gc: retry budget exhausted");
}

ProblemInstance generate_bw(const BwParams& p, uint64_t seed) {
    static const std::vector<std::string> kNames = {"red", "blue", "orange", "yellow",
                                                    "green"};
    Rng rng(seed);
    for (int attempt = 0; attempt < kGenerationRetries; ++attempt) {
        const int n = p.min_blocks + rng.uniform_int(p.max_blocks - p.min_blocks + 1);
        std::vector<std::string> names(kNames.begin(), kNames.begin() + n);
        const std::vector<int> init = bw::random_config(n, rng);
        const std::vector<int> goal_cfg = bw::random_config(n, rng);
        std::vector<std::pair<int, int>> goal_on;
        for (int b = 0; b < n; ++b)
            if (goal_cfg[b] >= 0) goal_on.emplace_back(b, goal_cfg[b]);
        if (goal_on.empty()) continue;
        BwData d;
        d.names = names;
        d.init_under = init;
        d.goal_on = goal_on;
        BwState s;
        s.under = init;
        s.holding = -1;
        if (bw::goal_satisfied(d, s)) continue;
        ProblemInstance inst = make_bw_instance(names, init, goal_on);
        const size_t plan_len =
            std::count(inst.answer_label.begin(), inst.answer_label.end(), '\n') + 1;
        if (static_cast<int>(plan_len) < p.min_plan) continue;
        inst.params = p;
        inst.seed = seed;
        return inst;
    }
    throw GenerationError("generate_bw: retry budget exhausted");
}

ProblemInstance generate_rc(const RcParams& p, uint64_t seed) {
    Rng rng(seed);
    for (int attempt = 0; attempt < kGenerationRetries; ++attempt) {
        const int n_steps =
            p.steps_choices[rng.uniform_int(static_cast<int>(p.steps_choices.size()))];
        std::vector<int> preds(p.n_preds);
        std::iota(preds.begin(), preds.end(), 0);
        rng.shuffle(preds);
        size_t cursor = 0;
        const auto draw = [&]() { return preds.at(cursor++); };

        // Gold chain c0 -> c1 -> ... -> goal via unary rules.
        std::vector<int> chain(n_steps + 1);
        for (int& c : chain) c = draw();
        const int goal = chain.back();

        // Initial facts: chain start plus a few unrelated predicates.
        const int extra =
            p.min_init_facts - 1 + rng.uniform_int(p.max_init_facts - p.min_init_facts + 1);
        std::vector<int> init_list = {chain[0]};
        for (int i = 0; i < extra; ++i) init_list.push_back(draw());
        uint32_t init_facts = 0;
        for (int f : init_list) init_facts |= 1u << f;

        // Predicates reserved as never-derivable (cold rule bodies).
        std::vector<int> frozen;
        for (int i = 0; i < 2; ++i) frozen.push_back(draw());

        // Remaining predicates become distractor heads.
        std::vector<int> head_pool(preds.begin() + cursor, preds.end());
        if (head_pool.size() < 3) continue;

        std::vector<RcRule> rules;
        for (int i = 0; i < n_steps; ++i) rules.push_back(RcRule{{chain[i]}, chain[i + 1], ""});

        // Distractor mix: heads never lie on the gold chain, so the minimum
        // derivation length stays exactly n_steps by construction.
        const int n_distract = p.n_rules - n_steps;
        // Applicability mix tuned against the target branching factor and
        // dead-application ratio; at least one distractor fires at the root so
        // greedy single-hop strategies fail.
        const int weights_root[4] = {0, 80, 20, 0};
        int acc = rng.uniform_int(100), n_root = 3;
        for (int k = 1; k < 4; ++k) {
            acc -= weights_root[k];
            if (acc < 0) {
                n_root = k;
                break;
            }
        }
        const int weights_follow[3] = {70, 25, 5};
        acc = rng.uniform_int(100);
        int n_follow = 2;
        for (int k = 0; k < 3; ++k) {
            acc -= weights_follow[k];
            if (acc < 0) {
                n_follow = k;
                break;
            }
        }

        std::vector<int> live_heads;  // heads of root/follow distractors, in order
        std::set<std::pair<std::vector<int>, int>> seen_rules;
        bool failed = false;
        const auto add_rule = [&](std::vector<int> body, int head) {
            std::sort(body.begin(), body.end());
            body.erase(std::unique(body.begin(), body.end()), body.end());
            if (!seen_rules.insert({body, head}).second) return false;
            rules.push_back(RcRule{body, head, ""});
            return true;
        };

        for (int i = 0; i < n_distract && !failed; ++i) {
            bool added = false;
            for (int tries = 0; tries < 50 && !added; ++tries) {
                int head;
                bool live = false;
                if (i < n_root + n_follow) {
                    if (head_pool.empty()) break;
                    head = head_pool.front();
                    live = true;
                } else {
                    // Cold rules may reuse heads.
                    const std::vector<int>& pool = live_heads.empty() ? frozen : live_heads;
                    head = rng.uniform() < 0.5 && !head_pool.empty()
                               ? head_pool[rng.uniform_int(static_cast<int>(head_pool.size()))]
                               : pool[rng.uniform_int(static_cast<int>(pool.size()))];
                }
                std::vector<int> body;
                const int body_size = rng.uniform() < 0.6 ? 1 : 2;
                if (i < n_root) {
                    for (int b = 0; b < body_size; ++b)
                        body.push_back(
                            init_list[rng.uniform_int(static_cast<int>(init_list.size()))]);
                } else if (i < n_root + n_follow) {
                    body.push_back(
                        live_heads[rng.uniform_int(static_cast<int>(live_heads.size()))]);
                    if (body_size == 2)
                        body.push_back(
                            init_list[rng.uniform_int(static_cast<int>(init_list.size()))]);
                } else {
                    body.push_back(frozen[rng.uniform_int(static_cast<int>(frozen.size()))]);
                    if (body_size == 2)
                        body.push_back(
                            init_list[rng.uniform_int(static_cast<int>(init_list.size()))]);
                }
                bool self_ref = false;
                for (int b : body)
                    if (b == head) self_ref = true;
                if (self_ref) continue;
                if (add_rule(body, head)) {
                    added = true;
                    if (live) {
                        head_pool.erase(head_pool.begin());
                        live_heads.push_back(head);
                    }
                }
            }
            if (!added) failed = true;
        }
        if (failed || static_cast<int>(rules.size()) != p.n_rules) continue;

        RcData probe;
        probe.n_preds = p.n_preds;
        probe.rules = rules;
        const int min_steps = rc::min_steps_to(probe, init_facts, goal);
        if (min_steps != n_steps) continue;  // audit; cannot fire by construction

        std::vector<RcRule> shuffled = rules;
        rng.shuffle(shuffled);
        ProblemInstance inst = make_rc_instance(shuffled, init_facts, goal, n_steps);
        inst.params = p;
        inst.seed = seed;
        return inst;
    }
    throw GenerationError("generate_rc: retry budget exhausted");
}

}  // namespace

ProblemInstance generate_instance(TaskId task, const Params& params, uint64_t seed) {
    switch (task) {
        case TaskId::G24: return generate_g24(std::get<G24Params>(params), seed);
        case TaskId::NQueens: return generate_nq(std::get<NqParams>(params), seed);
        case TaskId::GraphColoring: return generate_gc(std::get<GcParams>(params), seed);
        case TaskId::Blocksworld: return generate_bw(std::get<BwParams>(params), seed);
        case TaskId::RuleChain: return generate_rc(std::get<RcParams>(params), seed);
    }
    throw std::logic_error("generate_instance: bad task");
}

}  // namespace treeball::tasks
