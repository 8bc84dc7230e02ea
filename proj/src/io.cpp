#include "treeball/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace treeball::io {

using namespace tasks;

Json meta_block(const Json& config, uint64_t seed) {
    Json m;
    m["tool"] = "treeball";
    m["version"] = kVersion;
    m["config_hash"] = config_hash(config);
    m["seed"] = seed;
    m["config"] = config;
    return m;
}

std::string config_hash(const Json& config) {
    return hex64(fnv1a64(config.dump()));
}

Json params_to_json(const Params& params) {
    Json j;
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, G24Params>) {
                j["min_operand"] = p.min_operand;
                j["max_operand"] = p.max_operand;
                j["n_operands"] = p.n_operands;
                j["target"] = p.target;
                j["max_solutions"] = p.max_solutions;
            } else if constexpr (std::is_same_v<T, NqParams>) {
                j["n"] = p.n;
                j["prefix_min"] = p.prefix_min;
                j["prefix_max"] = p.prefix_max;
            } else if constexpr (std::is_same_v<T, GcParams>) {
                j["n_choices"] = p.n_choices;
                j["p_choices"] = p.p_choices;
                j["n_colors"] = p.n_colors;
            } else if constexpr (std::is_same_v<T, BwParams>) {
                j["min_blocks"] = p.min_blocks;
                j["max_blocks"] = p.max_blocks;
                j["min_plan"] = p.min_plan;
            } else {
                j["n_preds"] = p.n_preds;
                j["n_rules"] = p.n_rules;
                j["steps_choices"] = p.steps_choices;
                j["min_init_facts"] = p.min_init_facts;
                j["max_init_facts"] = p.max_init_facts;
            }
        },
        params);
    return j;
}

Params params_from_json(TaskId task, const Json& j) {
    switch (task) {
        case TaskId::G24: {
            G24Params p;
            p.min_operand = j.value("min_operand", p.min_operand);
            p.max_operand = j.value("max_operand", p.max_operand);
            p.n_operands = j.value("n_operands", p.n_operands);
            p.target = j.value("target", p.target);
            p.max_solutions = j.value("max_solutions", p.max_solutions);
            return p;
        }
        case TaskId::NQueens: {
            NqParams p;
            p.n = j.value("n", p.n);
            p.prefix_min = j.value("prefix_min", p.prefix_min);
            p.prefix_max = j.value("prefix_max", p.prefix_max);
            return p;
        }
        case TaskId::GraphColoring: {
            GcParams p;
            if (j.contains("n_choices")) p.n_choices = j["n_choices"].get<std::vector<int>>();
            if (j.contains("p_choices"))
                p.p_choices = j["p_choices"].get<std::vector<double>>();
            p.n_colors = j.value("n_colors", p.n_colors);
            return p;
        }
        case TaskId::Blocksworld: {
            BwParams p;
            p.min_blocks = j.value("min_blocks", p.min_blocks);
            p.max_blocks = j.value("max_blocks", p.max_blocks);
            p.min_plan = j.value("min_plan", p.min_plan);
            return p;
        }
        case TaskId::RuleChain: {
            RcParams p;
            p.n_preds = j.value("n_preds", p.n_preds);
            p.n_rules = j.value("n_rules", p.n_rules);
            if (j.contains("steps_choices"))
                p.steps_choices = j["steps_choices"].get<std::vector<int>>();
            p.min_init_facts = j.value("min_init_facts", p.min_init_facts);
            p.max_init_facts = j.value("max_init_facts", p.max_init_facts);
            return p;
        }
    }
    throw std::logic_error("params_from_json: bad task");
}

namespace {

Json rational_json(const Rational& r) {
    if (r.den == 1) return Json(r.num);
    return Json::array({r.num, r.den});
}

Rational rational_from_json(const Json& j) {
    if (j.is_array()) return Rational(j[0].get<long long>(), j[1].get<long long>());
    return Rational(j.get<long long>());
}

}  // namespace

Json instance_to_json(const ProblemInstance& inst) {
    Json j;
    j["task"] = task_name(inst.task);
    j["seed"] = inst.seed;
    j["params"] = params_to_json(inst.params);
    j["prompt"] = inst.prompt;
    j["init_state_text"] = inst.init_state_text;
    j["answer_label"] = inst.answer_label;
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, G24Data>) {
                Json ops = Json::array();
                for (const auto& v : d.operands) ops.push_back(rational_json(v));
                j["operands"] = ops;
                j["target"] = rational_json(d.target);
            } else if constexpr (std::is_same_v<T, NqData>) {
                j["n"] = d.n;
                j["prefix"] = d.prefix;
            } else if constexpr (std::is_same_v<T, GcData>) {
                j["n"] = d.n;
                j["n_colors"] = d.n_colors;
                Json edges = Json::array();
                for (const auto& [u, v] : d.edges) edges.push_back(Json::array({u, v}));
                j["edges"] = edges;
            } else if constexpr (std::is_same_v<T, BwData>) {
                j["blocks"] = d.names;
                j["init_under"] = d.init_under;
                Json goal = Json::array();
                for (const auto& [a, b] : d.goal_on) goal.push_back(Json::array({a, b}));
                j["goal_on"] = goal;
            } else {
                j["n_preds"] = d.n_preds;
                Json rules = Json::array();
                for (const auto& r : d.rules) {
                    Json rj;
                    rj["body"] = r.body;
                    rj["head"] = r.head;
                    rules.push_back(rj);
                }
                j["rules"] = rules;
                Json facts = Json::array();
                for (int i = 0; i < 32; ++i)
                    if (d.init_facts & (1u << i)) facts.push_back(i);
                j["init_facts"] = facts;
                j["goal_fact"] = d.goal_fact;
                j["n_steps"] = d.n_steps;
            }
        },
        inst.data);
    return j;
}

ProblemInstance instance_from_json(const Json& j) {
    const TaskId task = task_from_name(j.at("task").get<std::string>());
    ProblemInstance inst;
    switch (task) {
        case TaskId::G24: {
            std::vector<Rational> operands;
            for (const auto& v : j.at("operands")) operands.push_back(rational_from_json(v));
            inst = make_g24_instance(operands, rational_from_json(j.at("target")));
            break;
        }
        case TaskId::NQueens:
            inst = make_nq_instance(j.at("n").get<int>(),
                                    j.at("prefix").get<std::vector<int>>());
            break;
        case TaskId::GraphColoring: {
            std::vector<std::pair<int, int>> edges;
            for (const auto& e : j.at("edges"))
                edges.emplace_back(e[0].get<int>(), e[1].get<int>());
            inst = make_gc_instance(j.at("n").get<int>(), edges, j.at("n_colors").get<int>());
            break;
        }
        case TaskId::Blocksworld: {
            std::vector<std::pair<int, int>> goal;
            for (const auto& e : j.at("goal_on"))
                goal.emplace_back(e[0].get<int>(), e[1].get<int>());
            inst = make_bw_instance(j.at("blocks").get<std::vector<std::string>>(),
                                    j.at("init_under").get<std::vector<int>>(), goal);
            break;
        }
        case TaskId::RuleChain: {
            std::vector<RcRule> rules;
            for (const auto& r : j.at("rules"))
                rules.push_back(RcRule{r.at("body").get<std::vector<int>>(),
                                       r.at("head").get<int>(), ""});
            uint32_t facts = 0;
            for (const auto& f : j.at("init_facts")) facts |= 1u << f.get<int>();
            inst = make_rc_instance(rules, facts, j.at("goal_fact").get<int>(),
                                    j.at("n_steps").get<int>());
            break;
        }
    }
    inst.seed = j.value("seed", 0ULL);
    if (j.contains("params")) inst.params = params_from_json(task, j["params"]);
    // Stored prompt/answer must match the reconstruction bit-for-bit.
    if (j.contains("prompt") && j["prompt"].get<std::string>() != inst.prompt)
        throw std::runtime_error("instance_from_json: prompt mismatch");
    if (j.contains("answer_label") &&
        j["answer_label"].get<std::string>() != inst.answer_label)
        throw std::runtime_error("instance_from_json: answer_label mismatch");
    return inst;
}

void write_jsonl(const std::filesystem::path& path, const Json& meta,
                 const std::vector<Json>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    Json head;
    head["_meta"] = meta;
    out << head.dump() << "\n";
    for (const Json& r : records) out << r.dump() << "\n";
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Json> read_jsonl(const std::filesystem::path& path, Json* meta) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::vector<Json> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j = Json::parse(line);
        if (first && j.contains("_meta")) {
            if (meta) *meta = j["_meta"];
            first = false;
            continue;
        }
        first = false;
        out.push_back(std::move(j));
    }
    return out;
}

void write_instances(const std::filesystem::path& path, const Json& meta,
                     const std::vector<ProblemInstance>& instances) {
    std::vector<Json> records;
    records.reserve(instances.size());
    for (const auto& inst : instances) records.push_back(instance_to_json(inst));
    write_jsonl(path, meta, records);
}

std::vector<ProblemInstance> read_instances(const std::filesystem::path& path) {
    std::vector<ProblemInstance> out;
    for (const Json& j : read_jsonl(path)) out.push_back(instance_from_json(j));
    return out;
}

void write_csv(const std::filesystem::path& path, const Json& meta,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    for (const auto& [key, value] : meta.items())
        out << "# " << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump())
            << "\n";
    for (size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace treeball::io
