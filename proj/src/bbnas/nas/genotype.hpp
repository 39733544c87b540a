#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bbnas/nas/primitives.hpp"

namespace bbnas::nas {

struct GenotypeEdge {
    int source = 0;  // 0,1 = cell inputs; m+2 = internal node m
    std::string op;

    bool operator==(const GenotypeEdge&) const = default;
};

// Two kept edges per internal node; the cell output concatenates every
// internal node.
struct CellGenotype {
    std::vector<std::array<GenotypeEdge, 2>> nodes;

    bool operator==(const CellGenotype&) const = default;
};

struct Genotype {
    CellGenotype normal;
    CellGenotype reduce;
    CellGenotype ins_head;
    CellGenotype cls_head;

    bool operator==(const Genotype&) const = default;
};

// alphas is a row-major [edge_count(n_internal), ops.size()] matrix. For each
// internal node, incoming edges are ranked by their strongest non-zero
// softmax weight and the top two are kept, each with its argmax non-zero op.
// Ties go to the lower edge index, then the lower op index.
CellGenotype derive_cell_genotype(std::span<const double> alphas, std::size_t n_internal,
                                  const OpSet& ops);

Genotype derive_genotype(std::span<const double> normal, std::span<const double> reduce,
                         std::span<const double> ins_head, std::span<const double> cls_head,
                         std::size_t n_internal, const OpSet& ops);

enum class ExportFormat { json, dot };

ExportFormat parse_export_format(std::string_view name);

// Canonical single-line JSON:
// {"cls_head":[[src,"op",src,"op"],...],"ins_head":...,"normal":...,"reduce":...}
std::string to_json(const Genotype& g);
Genotype genotype_from_json(std::string_view text);

// One graph node per cell node, one labeled edge per selected op, plus
// unlabeled concat edges into each cell's output node.
std::string to_dot(const Genotype& g);

std::string export_genotype(const Genotype& g, ExportFormat format);

}  // namespace bbnas::nas
