#pragma once

#include <stdexcept>
#include <string>

namespace cwlate {

struct EmptyDataset : std::runtime_error {
    EmptyDataset() : std::runtime_error("dataset has no observations") {}
};

struct AllCellsDropped : std::runtime_error {
    AllCellsDropped()
        : std::runtime_error("no cell has enough observations on both sides of the cutoff") {}
};

struct InsufficientSupport : std::runtime_error {
    InsufficientSupport(const std::string& cell, const std::string& side)
        : std::runtime_error("too few in-bandwidth observations for cell '" + cell +
                             "' on side " + side),
          cell(cell), side(side) {}
    std::string cell;
    std::string side;
};

struct SingularDesign : std::runtime_error {
    explicit SingularDesign(const std::string& cell)
        : std::runtime_error("weighted design is rank-deficient in cell '" + cell + "'"),
          cell(cell) {}
    std::string cell;
};

struct SingularGamma : std::runtime_error {
    explicit SingularGamma(const std::string& side)
        : std::runtime_error("moment matrix not invertible on side " + side) {}
};

struct ZeroFirstStage : std::runtime_error {
    ZeroFirstStage() : std::runtime_error("first-stage aggregate is zero") {}
};

struct WeakCell : std::runtime_error {
    explicit WeakCell(std::size_t index)
        : std::runtime_error("first-stage discontinuity below tolerance in cell " +
                             std::to_string(index)),
          index(index) {}
    std::size_t index;
};

struct SignViolation : std::runtime_error {
    explicit SignViolation(std::size_t index)
        : std::runtime_error("instrument sign condition b*delta_x >= 0 violated in cell " +
                             std::to_string(index)),
          index(index) {}
    std::size_t index;
};

struct DegenerateDenominator : std::runtime_error {
    DegenerateDenominator()
        : std::runtime_error("weighted first-stage denominator is not positive") {}
};

struct NonPositiveVariance : std::runtime_error {
    NonPositiveVariance() : std::runtime_error("robust variance estimate is not positive") {}
};

struct NegativeCompliance : std::runtime_error {
    explicit NegativeCompliance(std::size_t index)
        : std::runtime_error("negative compliance rate in cell " + std::to_string(index)),
          index(index) {}
    std::size_t index;
};

struct DegenerateSample : std::runtime_error {
    DegenerateSample() : std::runtime_error("running-variable sample is constant") {}
};

}  // namespace cwlate
