#include "nso/vector.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nso {

void require_same_dim(const Vector& a, const Vector& b, const char* what) {
    if (a.dim() != b.dim()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(a.dim()) + " vs " +
                                    std::to_string(b.dim()) + ")");
    }
}

Vector Vector::basis(std::size_t dim, std::size_t index) {
    if (index >= dim) throw std::invalid_argument("Vector::basis: index out of range");
    Vector e(dim);
    e[index] = 1.0;
    return e;
}

Vector& Vector::operator+=(const Vector& other) {
    require_same_dim(*this, other, "Vector::operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Vector& Vector::operator-=(const Vector& other) {
    require_same_dim(*this, other, "Vector::operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Vector& Vector::operator*=(double scale) noexcept {
    for (double& x : data_) x *= scale;
    return *this;
}

Vector& Vector::axpy(double scale, const Vector& other) {
    require_same_dim(*this, other, "Vector::axpy");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
    return *this;
}

double Vector::squared_norm() const noexcept {
    double s = 0.0;
    for (double x : data_) s += x * x;
    return s;
}

double Vector::norm() const noexcept { return std::sqrt(squared_norm()); }

bool Vector::all_finite() const noexcept {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

Vector operator+(Vector lhs, const Vector& rhs) { return lhs += rhs; }
Vector operator-(Vector lhs, const Vector& rhs) { return lhs -= rhs; }
Vector operator-(Vector v) { return v *= -1.0; }
Vector operator*(double scale, Vector v) { return v *= scale; }
Vector operator*(Vector v, double scale) { return v *= scale; }

double dot(const Vector& a, const Vector& b) {
    require_same_dim(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
    return s;
}

double distance(const Vector& a, const Vector& b) { return (a - b).norm(); }

}  // namespace nso
