#include "cwlate/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace cwlate {

double kernel_weight(double u, const KernelSpec& spec) {
    double a = std::abs(u);
    if (a > 1.0) return 0.0;
    switch (spec.kind) {
        case KernelKind::triangular:
            return 1.0 - a;
        case KernelKind::uniform:
            return 0.5;
    }
    return 0.0;
}

RddDataset make_dataset(std::vector<double> y, std::vector<double> x,
                        std::vector<double> z, std::vector<std::string> cell,
                        double cutoff) {
    const std::size_t n = y.size();
    if (n == 0) throw EmptyDataset();
    if (x.size() != n || z.size() != n || cell.size() != n)
        throw std::invalid_argument("observation arrays differ in length");
    if (!std::isfinite(cutoff)) throw std::invalid_argument("cutoff must be finite");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(y[i]) || !std::isfinite(z[i]))
            throw std::invalid_argument("non-finite y or z at row " + std::to_string(i));
        if (x[i] != 0.0 && x[i] != 1.0)
            throw std::invalid_argument("treatment must be 0 or 1 at row " + std::to_string(i));
        z[i] -= cutoff;
    }
    RddDataset d;
    d.y = std::move(y);
    d.x = std::move(x);
    d.z = std::move(z);
    d.cell = std::move(cell);
    d.cutoff = cutoff;
    return d;
}

CellPartition build_partition(const RddDataset& data, std::size_t min_side_count) {
    const std::size_t n = data.n();
    if (n == 0) throw EmptyDataset();

    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;  // label -> (left, right)
    for (std::size_t i = 0; i < n; ++i) {
        auto& c = counts[data.cell[i]];
        if (data.z[i] < 0.0)
            ++c.first;
        else
            ++c.second;
    }

    CellPartition part;
    std::map<std::string, int> index;
    for (const auto& [label, c] : counts) {
        if (c.first >= min_side_count && c.second >= min_side_count) {
            index[label] = static_cast<int>(part.labels.size());
            part.labels.push_back(label);
            part.n_left.push_back(c.first);
            part.n_right.push_back(c.second);
            part.n_retained += c.first + c.second;
        } else {
            part.dropped.push_back(label);
        }
    }
    if (part.labels.empty()) throw AllCellsDropped();

    part.cell_index.resize(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = index.find(data.cell[i]);
        if (it != index.end()) part.cell_index[i] = it->second;
    }
    part.pi_hat.resize(part.m());
    for (std::size_t j = 0; j < part.m(); ++j)
        part.pi_hat[j] = static_cast<double>(part.n_left[j] + part.n_right[j]) /
                         static_cast<double>(part.n_retained);
    return part;
}

CellPartition pi_within_bandwidth(const RddDataset& data, const CellPartition& part, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    std::vector<std::size_t> counts(part.m(), 0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        int j = part.cell_index[i];
        if (j < 0 || std::abs(data.z[i]) > h) continue;
        ++counts[j];
        ++total;
    }
    if (total == 0) throw AllCellsDropped();
    CellPartition out = part;
    for (std::size_t j = 0; j < part.m(); ++j)
        out.pi_hat[j] = static_cast<double>(counts[j]) / static_cast<double>(total);
    return out;
}

RddDataset pooled_copy(const RddDataset& data) {
    RddDataset d = data;
    std::fill(d.cell.begin(), d.cell.end(), std::string("_all"));
    return d;
}

}  // namespace cwlate
