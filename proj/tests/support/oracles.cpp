#include "oracles.hpp"

#include <boost/math/tools/roots.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace oracle {

using airfc::cdouble;

airfc::ChannelSet random_channel(airfc::Rng& rng, int n, const std::vector<int>& ks, bool direct) {
    airfc::ChannelSet ch;
    int prev = n;
    for (int k : ks) {
        ch.hops.push_back(airfc::complex_gaussian_matrix(rng, k, prev));
        prev = k;
    }
    ch.hops.push_back(airfc::complex_gaussian_matrix(rng, n, prev));
    if (direct) ch.direct = airfc::complex_gaussian_matrix(rng, n, n);
    ch.carrier_frequency_hz = 28e9;
    return ch;
}

std::vector<CVector> random_gains(airfc::Rng& rng, const std::vector<int>& ks) {
    std::vector<CVector> g;
    for (int k : ks) g.push_back(airfc::complex_gaussian_vector(rng, k));
    return g;
}

airfc::AirFcParams random_params(airfc::Rng& rng, int n, const std::vector<int>& ks) {
    airfc::AirFcParams p;
    p.f1 = airfc::complex_gaussian_matrix(rng, n, n);
    p.f2 = airfc::complex_gaussian_matrix(rng, n, n);
    p.gains = random_gains(rng, ks);
    return p;
}

CMatrix dense_diag(const CVector& a) {
    CMatrix d = CMatrix::Zero(a.size(), a.size());
    for (Index i = 0; i < a.size(); ++i) d(i, i) = a(i);
    return d;
}

CMatrix effective_channel(const airfc::ChannelSet& ch, const std::vector<CVector>& gains) {
    CMatrix acc = ch.hops[0];
    for (std::size_t l = 0; l < gains.size(); ++l) {
        const CMatrix a = dense_diag(gains[l]);
        const CMatrix step = ch.hops[l + 1] * a;
        acc = (step * acc).eval();
    }
    if (ch.direct) acc += *ch.direct;
    return acc;
}

CMatrix transfer(const airfc::ChannelSet& ch, const std::vector<CVector>& gains, std::size_t j) {
    CMatrix t = ch.hops[j + 1] * dense_diag(gains[j]);
    for (std::size_t l = j + 1; l < gains.size(); ++l) t = (ch.hops[l + 1] * dense_diag(gains[l]) * t).eval();
    return t;
}

CMatrix noise_covariance(const airfc::ChannelSet& ch, const std::vector<CVector>& gains,
                         const airfc::NoiseModel& noise) {
    const Index n_r = ch.hops.back().rows();
    CMatrix r = noise.sigma_c_sq * CMatrix::Identity(n_r, n_r);
    for (std::size_t j = 0; j < gains.size(); ++j) {
        const CMatrix t = oracle::transfer(ch, gains, j);
        r += noise.sigma_u_sq[j] * t * t.adjoint();
    }
    return r;
}

double objective(const airfc::AirFcParams& p, const airfc::ChannelSet& ch, const CMatrix& w,
                 const airfc::NoiseModel& noise) {
    const CMatrix m = p.f2 * oracle::effective_channel(ch, p.gains) * p.f1;
    const CMatrix r = oracle::noise_covariance(ch, p.gains, noise);
    double fit = 0.0;
    for (Index i = 0; i < w.rows(); ++i)
        for (Index j = 0; j < w.cols(); ++j) fit += std::norm(m(i, j) - w(i, j));
    const cdouble tr = (p.f2 * r * p.f2.adjoint()).trace();
    return fit + tr.real();
}

RVector relay_input_power(const airfc::ChannelSet& ch, const std::vector<CVector>& gains, const CMatrix& f1,
                          std::size_t group, double sigma_u_sq) {
    CMatrix s = ch.hops[0] * f1;
    for (std::size_t l = 0; l < group; ++l) s = (ch.hops[l + 1] * dense_diag(gains[l]) * s).eval();
    RVector p(s.rows());
    for (Index k = 0; k < s.rows(); ++k) {
        double acc = 0.0;
        for (Index c = 0; c < s.cols(); ++c) acc += std::norm(s(k, c));
        p(k) = acc + sigma_u_sq;
    }
    return p;
}

CVector vec(const CMatrix& m) {
    CVector v(m.size());
    Index idx = 0;
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i) v(idx++) = m(i, j);
    return v;
}

CMatrix khatri_rao(const CMatrix& u, const CMatrix& v) {
    const Index k = u.cols();
    if (v.rows() != k) throw std::invalid_argument("khatri_rao: inner dimensions differ");
    CMatrix b(u.rows() * v.cols(), k);
    for (Index c = 0; c < k; ++c) {
        // vec(u_c v_c^T): entry (i, j) at i + j*rows
        for (Index j = 0; j < v.cols(); ++j)
            for (Index i = 0; i < u.rows(); ++i) b(i + j * u.rows(), c) = u(i, c) * v(c, j);
    }
    return b;
}

CVector gains_least_squares(const CMatrix& u, const CMatrix& v, const CMatrix& e, const RVector& d) {
    const CMatrix b = khatri_rao(u, v);
    const Index k = b.cols();
    CMatrix a(b.rows() + k, k);
    a.topRows(b.rows()) = b;
    a.bottomRows(k).setZero();
    for (Index i = 0; i < k; ++i) a(b.rows() + i, i) = std::sqrt(std::max(d(i), 0.0));
    CVector rhs = CVector::Zero(b.rows() + k);
    rhs.head(b.rows()) = vec(e);
    return a.colPivHouseholderQr().solve(rhs);
}

CMatrix combiner_least_squares(const CMatrix& u, const CMatrix& r, const CMatrix& w) {
    // ||f U - w||^2 + f R f^H = ||f [U, L] - [w, 0]||^2 with R = L L^H
    const Index n = u.rows();
    Eigen::LLT<CMatrix> llt(r);
    if (llt.info() != Eigen::Success) throw std::runtime_error("combiner oracle needs R positive definite");
    const CMatrix l = llt.matrixL();
    CMatrix stacked(n, u.cols() + n);
    stacked << u, l;
    const CMatrix design = stacked.transpose();  // rows: observations
    Eigen::ColPivHouseholderQR<CMatrix> qr(design);
    CMatrix f(w.rows(), n);
    for (Index i = 0; i < w.rows(); ++i) {
        CVector target = CVector::Zero(design.rows());
        target.head(u.cols()) = w.row(i).transpose();
        f.row(i) = qr.solve(target).transpose();
    }
    return f;
}

CMatrix precoder_constrained(const CMatrix& xi, const CMatrix& w, double p_max, double* lambda_out) {
    const Index n = xi.cols();
    const CMatrix gram = xi.adjoint() * xi;
    const CMatrix rhs = xi.adjoint() * w;
    auto f1_at = [&](double lambda) -> CMatrix {
        if (lambda == 0.0) return xi.completeOrthogonalDecomposition().solve(w);
        return (gram + lambda * CMatrix::Identity(n, n)).ldlt().solve(rhs);
    };
    const CMatrix free = f1_at(0.0);
    if (free.squaredNorm() <= p_max) {
        if (lambda_out) *lambda_out = 0.0;
        return free;
    }
    auto g = [&](double lambda) { return f1_at(lambda).squaredNorm() - p_max; };
    double hi = rhs.norm() / std::sqrt(p_max);  // ||F1(lambda)|| <= ||Xi^H W|| / lambda
    double lo = hi;
    while (g(lo) < 0.0) lo *= 0.5;
    std::uintmax_t iters = 500;
    const auto bracket =
        boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
    const double lambda = 0.5 * (bracket.first + bracket.second);
    if (lambda_out) *lambda_out = lambda;
    return f1_at(lambda);
}

int rank(const CMatrix& m, double tol) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<CMatrix> svd(m);
    const RVector s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    int r = 0;
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > tol * s(0)) ++r;
    return r;
}

double rel_diff(double a, double b) {
    return std::abs(a - b) / std::max(std::abs(b), std::numeric_limits<double>::min());
}

double rel_diff(const CMatrix& a, const CMatrix& b) {
    return (a - b).norm() / std::max(b.norm(), std::numeric_limits<double>::min());
}

}  // namespace oracle
