#include "bbnas/nas/genotype.hpp"

#include <cmath>
#include "json.hpp"
#include <sstream>

#include "bbnas/common/error.hpp"
#include "bbnas/nas/cell.hpp"

namespace bbnas::nas {

using nlohmann::json;

CellGenotype derive_cell_genotype(std::span<const double> alphas, std::size_t n_internal,
                                  const OpSet& ops) {
    const std::size_t K = ops.size();
    require(alphas.size() == edge_count(n_internal) * K, ErrorKind::shape_mismatch,
            "derive_genotype: alpha matrix has " + std::to_string(alphas.size()) +
                " entries, expected " + std::to_string(edge_count(n_internal) * K));
    const std::size_t zero = ops.zero_index();

    struct Choice {
        std::size_t edge;
        std::size_t op;
        double strength;
    };
    // Strongest non-zero op per edge.
    auto best_on_edge = [&](std::size_t e) {
        const double* row = alphas.data() + e * K;
        double m = row[0];
        for (std::size_t k = 1; k < K; ++k) m = std::max(m, row[k]);
        double z = 0.0;
        for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - m);
        Choice c{e, K, -1.0};
        for (std::size_t k = 0; k < K; ++k) {
            if (k == zero) continue;
            const double p = std::exp(row[k] - m) / z;
            if (p > c.strength) {
                c.strength = p;
                c.op = k;
            }
        }
        return c;
    };

    CellGenotype g;
    for (std::size_t j = 0; j < n_internal; ++j) {
        std::vector<Choice> cand;
        for (std::size_t src = 0; src < j + 2; ++src) {
            const double* row = alphas.data() + edge_index(j, src) * K;
            for (std::size_t k = 0; k < K; ++k)
                require(std::isfinite(row[k]), ErrorKind::numeric,
                        "derive_genotype: non-finite architecture weight");
            cand.push_back(best_on_edge(edge_index(j, src)));
        }
        // Stable selection of the two strongest; earlier edges win ties.
        std::size_t first = 0;
        for (std::size_t i = 1; i < cand.size(); ++i)
            if (cand[i].strength > cand[first].strength) first = i;
        std::size_t second = first == 0 ? 1 : 0;
        for (std::size_t i = 0; i < cand.size(); ++i)
            if (i != first && cand[i].strength > cand[second].strength) second = i;
        const std::size_t lo = std::min(first, second), hi = std::max(first, second);
        g.nodes.push_back({GenotypeEdge{static_cast<int>(lo), ops.name(cand[lo].op)},
                           GenotypeEdge{static_cast<int>(hi), ops.name(cand[hi].op)}});
    }
    return g;
}

Genotype derive_genotype(std::span<const double> normal, std::span<const double> reduce,
                         std::span<const double> ins_head, std::span<const double> cls_head,
                         std::size_t n_internal, const OpSet& ops) {
    return Genotype{derive_cell_genotype(normal, n_internal, ops),
                    derive_cell_genotype(reduce, n_internal, ops),
                    derive_cell_genotype(ins_head, n_internal, ops),
                    derive_cell_genotype(cls_head, n_internal, ops)};
}

ExportFormat parse_export_format(std::string_view name) {
    if (name == "json") return ExportFormat::json;
    if (name == "dot") return ExportFormat::dot;
    fail(ErrorKind::invalid_argument, "unknown export format '" + std::string(name) + "'");
}

namespace {

constexpr std::pair<const char*, CellGenotype Genotype::*> kCells[] = {
    {"normal", &Genotype::normal},
    {"reduce", &Genotype::reduce},
    {"ins_head", &Genotype::ins_head},
    {"cls_head", &Genotype::cls_head},
};

json cell_to_json(const CellGenotype& c) {
    json arr = json::array();
    for (const auto& node : c.nodes)
        arr.push_back(json::array({node[0].source, node[0].op, node[1].source, node[1].op}));
    return arr;
}

CellGenotype cell_from_json(const json& arr, const char* which) {
    require(arr.is_array(), ErrorKind::format, std::string("genotype: '") + which + "' is not an array");
    CellGenotype c;
    for (std::size_t j = 0; j < arr.size(); ++j) {
        const json& node = arr[j];
        require(node.is_array() && node.size() == 4 && node[0].is_number_integer() &&
                    node[1].is_string() && node[2].is_number_integer() && node[3].is_string(),
                ErrorKind::format,
                std::string("genotype: ") + which + " node " + std::to_string(j) +
                    " must be [src, op, src, op]");
        std::array<GenotypeEdge, 2> pair;
        for (int e = 0; e < 2; ++e) {
            const int src = node[2 * e].get<int>();
            const std::string op = node[2 * e + 1].get<std::string>();
            require(src >= 0 && src < static_cast<int>(j) + 2, ErrorKind::format,
                    std::string("genotype: ") + which + " node " + std::to_string(j) +
                        " has invalid source " + std::to_string(src));
            require(is_known_primitive(op) && op != "zero", ErrorKind::format,
                    std::string("genotype: ") + which + " node " + std::to_string(j) +
                        " has invalid op '" + op + "'");
            pair[e] = GenotypeEdge{src, op};
        }
        c.nodes.push_back(pair);
    }
    return c;
}

}  // namespace

std::string to_json(const Genotype& g) {
    json j = json::object();
    for (const auto& [key, member] : kCells) j[key] = cell_to_json(g.*member);
    return j.dump();
}

Genotype genotype_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorKind::format, std::string("genotype: invalid JSON: ") + e.what());
    }
    require(j.is_object(), ErrorKind::format, "genotype: top level must be an object");
    Genotype g;
    for (const auto& [key, member] : kCells) {
        require(j.contains(key), ErrorKind::format, std::string("genotype: missing '") + key + "'");
        g.*member = cell_from_json(j[key], key);
    }
    return g;
}

std::string to_dot(const Genotype& g) {
    std::ostringstream os;
    os << "digraph genotype {\n  rankdir=LR;\n";
    for (const auto& [key, member] : kCells) {
        const CellGenotype& c = g.*member;
        const std::string p = key;
        os << "  subgraph cluster_" << p << " {\n    label=\"" << p << "\";\n";
        os << "    " << p << "_in0 [label=\"c_{k-2}\"];\n";
        os << "    " << p << "_in1 [label=\"c_{k-1}\"];\n";
        for (std::size_t j = 0; j < c.nodes.size(); ++j)
            os << "    " << p << "_n" << j << " [label=\"" << j << "\"];\n";
        os << "    " << p << "_out [label=\"c_{k}\"];\n";
        auto src_name = [&](int s) {
            return s < 2 ? p + "_in" + std::to_string(s) : p + "_n" + std::to_string(s - 2);
        };
        for (std::size_t j = 0; j < c.nodes.size(); ++j)
            for (const auto& e : c.nodes[j])
                os << "    " << src_name(e.source) << " -> " << p << "_n" << j << " [label=\""
                   << e.op << "\"];\n";
        for (std::size_t j = 0; j < c.nodes.size(); ++j)
            os << "    " << p << "_n" << j << " -> " << p << "_out [style=dashed];\n";
        os << "  }\n";
    }
    os << "}\n";
    return os.str();
}

std::string export_genotype(const Genotype& g, ExportFormat format) {
    return format == ExportFormat::json ? to_json(g) + "\n" : to_dot(g);
}

}  // namespace bbnas::nas
