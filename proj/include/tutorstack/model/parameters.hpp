#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "tutorstack/model/config.hpp"

namespace tutorstack::model {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using MatrixMap = Eigen::Map<Matrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const Matrix<T>>;

struct TensorEntry {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;  // in elements

    std::size_t size() const { return rows * cols; }
};

/// Named 2-D tensors packed back to back in one flat buffer. The order is the
/// checkpoint order.
class ParameterLayout {
public:
    explicit ParameterLayout(const ModelConfig& config);
    ParameterLayout() = default;

    const std::vector<TensorEntry>& entries() const { return entries_; }
    const TensorEntry& at(const std::string& name) const;
    std::size_t total_size() const { return total_; }

private:
    void add(std::string name, std::size_t rows, std::size_t cols);

    std::vector<TensorEntry> entries_;
    std::map<std::string, std::size_t> index_;
    std::size_t total_ = 0;
};

/// Flat parameter (or gradient) storage with named matrix views.
template <typename T>
class ParameterSet {
public:
    ParameterSet() = default;
    explicit ParameterSet(const ParameterLayout& layout)
        : layout_(&layout), values_(layout.total_size(), T(0)) {}

    MatrixMap<T> operator[](const std::string& name) {
        const auto& e = layout_->at(name);
        return MatrixMap<T>(values_.data() + e.offset, static_cast<Eigen::Index>(e.rows),
                            static_cast<Eigen::Index>(e.cols));
    }
    ConstMatrixMap<T> operator[](const std::string& name) const {
        const auto& e = layout_->at(name);
        return ConstMatrixMap<T>(values_.data() + e.offset, static_cast<Eigen::Index>(e.rows),
                                 static_cast<Eigen::Index>(e.cols));
    }

    std::vector<T>& values() { return values_; }
    const std::vector<T>& values() const { return values_; }
    const ParameterLayout& layout() const { return *layout_; }

    void set_zero() { std::fill(values_.begin(), values_.end(), T(0)); }

    template <typename U>
    ParameterSet<U> cast() const {
        ParameterSet<U> out(*layout_);
        for (std::size_t i = 0; i < values_.size(); ++i) out.values()[i] = static_cast<U>(values_[i]);
        return out;
    }

private:
    const ParameterLayout* layout_ = nullptr;
    std::vector<T> values_;
};

/// Tensor name helpers for layer-scoped parameters.
std::string layer_param(std::size_t layer, const char* name);

/// Deterministic initialization: Xavier-uniform linear weights, N(0, 0.02)
/// embeddings (PAD rows zero), LayerNorm gamma = 1, identity convolutions and
/// an initial decay of 0.1 on the monotonic heads.
void initialize(ParameterSet<float>& params, const ModelConfig& config, std::uint64_t seed);

}  // namespace tutorstack::model
