#include "tdiff/model_io.hpp"

#include <fstream>

#include "tdiff/errors.hpp"

namespace tdiff {

json to_json(const Vec& v) {
    json j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

json to_json(const Mat& m) {
    json j = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        j.push_back(row);
    }
    return j;
}

Vec vec_from_json(const json& j) {
    if (j.is_number()) return Vec::Constant(1, j.get<double>());
    if (!j.is_array()) throw InvalidArgument("expected a number or an array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InvalidArgument("expected an array of numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

Mat mat_from_json(const json& j) {
    if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
    if (!j.is_array() || j.empty()) throw InvalidArgument("expected a nested array");
    if (!j[0].is_array()) {
        // a flat array is read as a single row
        return vec_from_json(j).transpose();
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Vec row = vec_from_json(j[static_cast<std::size_t>(r)]);
        if (row.size() != cols) throw InvalidArgument("ragged matrix");
        m.row(r) = row.transpose();
    }
    return m;
}

namespace {

const json& need(const json& j, const char* key) {
    if (!j.contains(key)) throw InvalidArgument(std::string("model JSON: missing key '") + key + "'");
    return j.at(key);
}

double scalar(const json& j, const char* key) {
    const json& v = need(j, key);
    if (v.is_number()) return v.get<double>();
    const Vec x = vec_from_json(v);
    if (x.size() != 1) throw InvalidArgument(std::string("model JSON: '") + key + "' must be a scalar");
    return x[0];
}

// A from either "A" or the p = 1 shorthand "alpha" (vm also allows an alpha vector with zero interaction).
Mat drift_matrix(const json& j) {
    if (j.contains("A")) return mat_from_json(j.at("A"));
    const Vec alpha = vec_from_json(need(j, "alpha"));
    return alpha.asDiagonal();
}

Mat diffusion_cov(const json& j) {
    if (j.contains("Sigma")) return mat_from_json(j.at("Sigma"));
    const double s = scalar(j, "sigma");
    return Mat::Constant(1, 1, s * s);
}

}  // namespace

json model_to_json(const DiffusionModel& model) {
    json j;
    j["family"] = to_string(model.family());
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, MvmProcParams>) {
                j["mu"] = to_json(p.mu);
                j["A"] = to_json(p.A);
                j["sigma"] = p.sigma;
            } else if constexpr (std::is_same_v<T, WnProcParams>) {
                j["mu"] = to_json(p.mu);
                j["A"] = to_json(p.A);
                j["Sigma"] = to_json(p.sigma);
                if (p.window != 1) j["window"] = p.window;
            } else if constexpr (std::is_same_v<T, JpProcParams>) {
                j["mu"] = p.mu;
                j["alpha"] = p.alpha;
                j["psi"] = p.psi;
                j["sigma"] = p.sigma;
            } else if constexpr (std::is_same_v<T, MivmProcParams>) {
                j["M"] = to_json(p.means);
                j["A"] = to_json(p.A);
                j["weights"] = to_json(p.weights);
                j["sigma"] = p.sigma;
            } else {
                j["mu"] = to_json(p.mu);
                j["A"] = to_json(p.A);
                j["Sigma"] = to_json(p.sigma);
            }
        },
        model.params());
    return j;
}

DiffusionModel model_from_json(const json& j) {
    const Family fam = family_from_string(need(j, "family").get<std::string>());
    switch (fam) {
        case Family::vm: {
            MvmProcParams p;
            p.mu = cmod(vec_from_json(need(j, "mu")));
            p.A = drift_matrix(j);
            p.sigma = scalar(j, "sigma");
            return DiffusionModel(p);
        }
        case Family::wn: {
            WnProcParams p;
            p.mu = cmod(vec_from_json(need(j, "mu")));
            p.A = drift_matrix(j);
            p.sigma = diffusion_cov(j);
            if (j.contains("window")) p.window = j.at("window").get<int>();
            return DiffusionModel(p);
        }
        case Family::jp: {
            JpProcParams p;
            p.mu = cmod(scalar(j, "mu"));
            p.alpha = scalar(j, "alpha");
            p.psi = j.contains("psi") ? scalar(j, "psi") : 0.0;
            p.sigma = scalar(j, "sigma");
            return DiffusionModel(p);
        }
        case Family::mivm: {
            MivmProcParams p;
            p.means = mat_from_json(need(j, "M"));
            for (Eigen::Index r = 0; r < p.means.rows(); ++r) {
                p.means.row(r) = cmod(Vec(p.means.row(r).transpose())).transpose();
            }
            p.A = mat_from_json(need(j, "A"));
            if (p.means.cols() == 1 && p.A.rows() == 1 && p.A.cols() == p.means.rows()) p.A.transposeInPlace();
            p.weights = vec_from_json(need(j, "weights"));
            p.sigma = scalar(j, "sigma");
            return DiffusionModel(p);
        }
        case Family::ou: {
            OuProcParams p;
            p.mu = vec_from_json(need(j, "mu"));
            p.A = drift_matrix(j);
            p.sigma = diffusion_cov(j);
            return DiffusionModel(p);
        }
    }
    throw InvalidArgument("unreachable family");
}

DiffusionModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open model file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvalidArgument("malformed JSON in '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

json law_to_json(const StationaryLaw& law) {
    json j;
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, MvMParams>) {
                j["family"] = "vm";
                j["mu"] = to_json(p.mu);
                j["K"] = to_json(p.kappa);
                j["Lambda"] = to_json(p.lambda);
            } else if constexpr (std::is_same_v<T, WNParams>) {
                j["family"] = "wn";
                j["mu"] = to_json(p.mu);
                j["Sigma"] = to_json(p.sigma);
            } else if constexpr (std::is_same_v<T, JPParams>) {
                j["family"] = "jp";
                j["mu"] = p.mu;
                j["K"] = p.kappa;
                j["psi"] = p.psi;
            } else {
                j["family"] = "mivm";
                j["M"] = to_json(p.means);
                j["K"] = to_json(p.kappa);
                j["weights"] = to_json(p.weights);
            }
        },
        law);
    return j;
}

StationaryLaw law_from_json(const json& j) {
    const Family fam = family_from_string(need(j, "family").get<std::string>());
    switch (fam) {
        case Family::vm: {
            MvMParams p;
            p.mu = vec_from_json(need(j, "mu"));
            p.kappa = vec_from_json(need(j, "K"));
            p.lambda = j.contains("Lambda") ? mat_from_json(j.at("Lambda"))
                                            : Mat::Zero(p.mu.size(), p.mu.size());
            return p;
        }
        case Family::wn:
        case Family::ou:
            return WNParams{vec_from_json(need(j, "mu")), mat_from_json(need(j, "Sigma"))};
        case Family::jp:
            return JPParams{scalar(j, "mu"), scalar(j, "K"), scalar(j, "psi")};
        case Family::mivm:
            return MivMParams{mat_from_json(need(j, "M")), mat_from_json(need(j, "K")),
                              vec_from_json(need(j, "weights"))};
    }
    throw InvalidArgument("unreachable family");
}

}  // namespace tdiff
