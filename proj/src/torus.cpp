#include "tdiff/torus.hpp"

#include <cmath>
#include <string>

#include "tdiff/errors.hpp"

namespace tdiff {

double cmod(double x) {
    if (x >= -kPi && x < kPi) return x;
    if (!std::isfinite(x)) throw InvalidArgument("cmod: non-finite input");
    double r = x + kPi - kTwoPi * std::floor((x + kPi) / kTwoPi);
    // floor can leave r == 2pi after rounding
    if (r >= kTwoPi) r -= kTwoPi;
    if (r < 0.0) r = 0.0;
    return r - kPi;
}

Vec cmod(const Vec& x) {
    Vec out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = cmod(x[i]);
    return out;
}

int winding(double x) {
    if (!std::isfinite(x)) throw InvalidArgument("winding: non-finite input");
    return static_cast<int>(std::floor((x + kPi) / kTwoPi));
}

IVec winding(const Vec& x) {
    IVec out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = winding(x[i]);
    return out;
}

LatticeBox LatticeBox::symmetric(int dim, int radius) {
    return {IVec::Constant(dim, -radius), IVec::Constant(dim, radius)};
}

std::size_t LatticeBox::volume() const {
    if (lower.size() != upper.size()) throw InvalidArgument("LatticeBox: dimension mismatch");
    std::size_t v = 1;
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (lower[i] > upper[i]) throw InvalidArgument("LatticeBox: lower > upper");
        v *= static_cast<std::size_t>(upper[i] - lower[i] + 1);
    }
    return v;
}

std::vector<IVec> lattice_enumerate(const LatticeBox& box, std::size_t cap) {
    const std::size_t n = box.volume();
    if (n > cap) {
        throw ResourceError("lattice_enumerate: " + std::to_string(n) + " terms exceed cap " +
                            std::to_string(cap));
    }
    std::vector<IVec> out;
    out.reserve(n);
    IVec k = box.lower;
    const Eigen::Index p = box.dim();
    for (std::size_t count = 0; count < n; ++count) {
        out.push_back(k);
        for (Eigen::Index d = p - 1; d >= 0; --d) {
            if (k[d] < box.upper[d]) {
                ++k[d];
                break;
            }
            k[d] = box.lower[d];
        }
    }
    return out;
}

namespace {

CircularMean mean_from_sums(const Vec& s, const Vec& c) {
    CircularMean out;
    Vec m(s.size());
    for (Eigen::Index j = 0; j < s.size(); ++j) {
        if (s[j] == 0.0 && c[j] == 0.0) {
            m[j] = 0.0;
            out.degenerate = true;
        } else {
            m[j] = std::atan2(s[j], c[j]);
        }
    }
    out.mean = TorusPoint(m);
    return out;
}

}  // namespace

CircularMean circular_mean(const std::vector<TorusPoint>& sample) {
    if (sample.empty()) throw InvalidArgument("circular_mean: empty sample");
    const Eigen::Index p = sample.front().dim();
    Vec s = Vec::Zero(p), c = Vec::Zero(p);
    for (const auto& pt : sample) {
        if (pt.dim() != p) throw InvalidArgument("circular_mean: dimension mismatch");
        s += pt.coords().array().sin().matrix();
        c += pt.coords().array().cos().matrix();
    }
    return mean_from_sums(s, c);
}

CircularMean circular_mean(const Mat& rows) {
    if (rows.rows() == 0) throw InvalidArgument("circular_mean: empty sample");
    Vec s = rows.array().sin().colwise().sum().transpose();
    Vec c = rows.array().cos().colwise().sum().transpose();
    return mean_from_sums(s, c);
}

}  // namespace tdiff
