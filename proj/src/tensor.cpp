#include "restyle/tensor.hpp"

#include <cmath>
#include <sstream>

namespace restyle {

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::norm2() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

double Tensor::mean() const {
    if (data_.empty()) return 0.0;
    double s = 0.0;
    for (double v : data_) s += v;
    return s / static_cast<double>(data_.size());
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ", ";
        os << shape_[i];
    }
    os << ")";
    return os.str();
}

}  // namespace restyle
