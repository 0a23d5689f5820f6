#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace nso {

/// Dense point in parameter space. Dimension is fixed at construction and
/// every binary operation requires equal dimensions (std::invalid_argument).
class Vector {
public:
    Vector() = default;
    explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
    Vector(std::initializer_list<double> values) : data_(values) {}
    explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

    static Vector basis(std::size_t dim, std::size_t index);

    std::size_t dim() const noexcept { return data_.size(); }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    const std::vector<double>& values() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    Vector& operator+=(const Vector& other);
    Vector& operator-=(const Vector& other);
    Vector& operator*=(double scale) noexcept;
    /// this += scale * other
    Vector& axpy(double scale, const Vector& other);

    double norm() const noexcept;
    double squared_norm() const noexcept;
    bool all_finite() const noexcept;

    bool operator==(const Vector&) const = default;

private:
    std::vector<double> data_;
};

Vector operator+(Vector lhs, const Vector& rhs);
Vector operator-(Vector lhs, const Vector& rhs);
Vector operator-(Vector v);
Vector operator*(double scale, Vector v);
Vector operator*(Vector v, double scale);

double dot(const Vector& a, const Vector& b);
double distance(const Vector& a, const Vector& b);

/// Throws std::invalid_argument when dimensions differ.
void require_same_dim(const Vector& a, const Vector& b, const char* what);

}  // namespace nso
