#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cwlate/errors.hpp"

namespace cwlate {

enum class KernelKind { triangular, uniform };

struct KernelSpec {
    KernelKind kind = KernelKind::triangular;
};

// k(u) on [-1,1]; zero outside.
double kernel_weight(double u, const KernelSpec& spec);

// Observations with the running variable already centered at the cutoff.
// The "+" side is z >= 0 (points exactly at the cutoff count as treated side).
struct RddDataset {
    std::vector<double> y;
    std::vector<double> x;        // binary treatment, each entry 0 or 1
    std::vector<double> z;        // running variable, centered
    std::vector<std::string> cell;
    double cutoff = 0.0;          // original cutoff, kept for reporting

    std::size_t n() const { return y.size(); }
};

// Validates lengths/finiteness, enforces x in {0,1}, and centers z at the
// cutoff. Throws EmptyDataset or std::invalid_argument.
RddDataset make_dataset(std::vector<double> y, std::vector<double> x,
                        std::vector<double> z, std::vector<std::string> cell,
                        double cutoff);

struct CellPartition {
    std::vector<std::string> labels;      // retained cells, sorted
    std::vector<double> pi_hat;           // shares over retained observations
    std::vector<std::size_t> n_left;      // z < 0 counts per retained cell
    std::vector<std::size_t> n_right;     // z >= 0 counts per retained cell
    std::vector<std::string> dropped;     // cells failing the two-sided count rule
    std::vector<int> cell_index;          // per observation; -1 if its cell was dropped
    std::size_t n_retained = 0;           // observations in retained cells

    std::size_t m() const { return labels.size(); }
};

// Keeps cells with at least min_side_count observations on each side of the
// cutoff; renormalizes pi_hat over the survivors.
CellPartition build_partition(const RddDataset& data, std::size_t min_side_count = 5);

// Same retained cells, but pi_hat recomputed from observations with |z| <= h.
// Cells with no in-window observations keep a zero share only if others carry
// the mass; throws AllCellsDropped if the window is empty.
CellPartition pi_within_bandwidth(const RddDataset& data, const CellPartition& part, double h);

// Collapses every observation into a single pooled cell labelled "_all".
RddDataset pooled_copy(const RddDataset& data);

}  // namespace cwlate
