#pragma once
// U(1)-graded dense linear algebra.
//
// Bond spaces are split into sectors labelled by an integer charge: the number
// of spin flips to the left of a bond relative to the Neel reference pattern.
// A GradedMatrix stores one dense block per row sector; the column sector of
// every block is fixed by the selection rule col = row + charge_shift.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lcmps/errors.hpp"

namespace lcmps {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

// Sector label on a bond.
using Charge = int;

// Dimension of every sector of a bond space, ordered by charge.
using SectorDims = std::map<Charge, Index>;

inline Index total_dim(const SectorDims& dims) {
    Index n = 0;
    for (const auto& [q, d] : dims) n += d;
    return n;
}

// Offset of each sector inside the dense (unblocked) layout of a bond space.
inline std::map<Charge, Index> sector_offsets(const SectorDims& dims) {
    std::map<Charge, Index> off;
    Index n = 0;
    for (const auto& [q, d] : dims) {
        off[q] = n;
        n += d;
    }
    return off;
}

// Absent sectors are zero blocks.
class GradedVector {
  public:
    GradedVector() = default;

    void set_block(Charge q, Vector v) { blocks_[q] = std::move(v); }
    const Vector* block(Charge q) const {
        auto it = blocks_.find(q);
        return it == blocks_.end() ? nullptr : &it->second;
    }
    const std::map<Charge, Vector>& blocks() const { return blocks_; }
    bool empty() const { return blocks_.empty(); }

    double norm2() const {
        double s = 0.0;
        for (const auto& [q, v] : blocks_) s += v.squaredNorm();
        return s;
    }

    // Unit vector e_index in sector q.
    static GradedVector unit(Charge q, Index dim, Index index) {
        GradedVector g;
        Vector v = Vector::Zero(dim);
        v(index) = 1.0;
        g.set_block(q, std::move(v));
        return g;
    }

    Vector dense(const SectorDims& space) const {
        Vector out = Vector::Zero(total_dim(space));
        const auto off = sector_offsets(space);
        for (const auto& [q, v] : blocks_) {
            auto it = off.find(q);
            if (it == off.end() || space.at(q) != v.size())
                throw std::invalid_argument("GradedVector::dense: sector " + std::to_string(q) +
                                            " not compatible with space");
            out.segment(it->second, v.size()) = v;
        }
        return out;
    }

  private:
    std::map<Charge, Vector> blocks_;
};

class GradedMatrix {
  public:
    GradedMatrix() = default;
    GradedMatrix(SectorDims rows, SectorDims cols, int charge_shift)
        : rows_(std::move(rows)), cols_(std::move(cols)), shift_(charge_shift) {}

    const SectorDims& row_space() const { return rows_; }
    const SectorDims& col_space() const { return cols_; }
    int charge_shift() const { return shift_; }
    const std::map<Charge, Matrix>& blocks() const { return blocks_; }

    // Inserts the block with row sector q; its column sector is q + charge_shift.
    // Blocks that violate the selection rule or the sector dimensions are rejected.
    void set_block(Charge q, Matrix m) {
        auto r = rows_.find(q);
        auto c = cols_.find(q + shift_);
        if (r == rows_.end() || c == cols_.end())
            throw std::invalid_argument("GradedMatrix: block (" + std::to_string(q) + ", " +
                                        std::to_string(q + shift_) +
                                        ") violates the selection rule for shift " +
                                        std::to_string(shift_));
        if (m.rows() != r->second || m.cols() != c->second)
            throw std::invalid_argument("GradedMatrix: block at sector " + std::to_string(q) +
                                        " has shape " + std::to_string(m.rows()) + "x" +
                                        std::to_string(m.cols()) + ", expected " +
                                        std::to_string(r->second) + "x" +
                                        std::to_string(c->second));
        blocks_[q] = std::move(m);
    }

    const Matrix* block(Charge q) const {
        auto it = blocks_.find(q);
        return it == blocks_.end() ? nullptr : &it->second;
    }

    GradedMatrix scaled(Complex a) const {
        GradedMatrix out(rows_, cols_, shift_);
        for (const auto& [q, m] : blocks_) out.blocks_[q] = a * m;
        return out;
    }

    // this += a * other. Both operands must share spaces and shift.
    void add_scaled(Complex a, const GradedMatrix& other) {
        if (other.shift_ != shift_ || other.rows_ != rows_ || other.cols_ != cols_)
            throw std::invalid_argument("GradedMatrix::add_scaled: incompatible operands");
        for (const auto& [q, m] : other.blocks_) {
            auto it = blocks_.find(q);
            if (it == blocks_.end())
                blocks_[q] = a * m;
            else
                it->second += a * m;
        }
    }

    Matrix dense() const {
        Matrix out = Matrix::Zero(total_dim(rows_), total_dim(cols_));
        const auto ro = sector_offsets(rows_);
        const auto co = sector_offsets(cols_);
        for (const auto& [q, m] : blocks_)
            out.block(ro.at(q), co.at(q + shift_), m.rows(), m.cols()) = m;
        return out;
    }

    // Product of graded matrices; shifts add.
    friend GradedMatrix operator*(const GradedMatrix& a, const GradedMatrix& b) {
        if (a.cols_ != b.rows_)
            throw std::invalid_argument("GradedMatrix product: inner bond spaces differ");
        GradedMatrix out(a.rows_, b.cols_, a.shift_ + b.shift_);
        for (const auto& [q, ma] : a.blocks_) {
            const Matrix* mb = b.block(q + a.shift_);
            if (mb == nullptr) continue;
            out.blocks_[q] = ma * (*mb);
        }
        return out;
    }

  private:
    SectorDims rows_;
    SectorDims cols_;
    int shift_ = 0;
    std::map<Charge, Matrix> blocks_;
};

enum class Side { left, right };

// side == left:  row vector times matrix, v(q) -> v(q + shift).
// side == right: matrix times column vector, v(q + shift) -> v(q).
inline GradedVector graded_matvec(const GradedMatrix& m, const GradedVector& v, Side side) {
    GradedVector out;
    const int shift = m.charge_shift();
    if (side == Side::left) {
        for (const auto& [q, x] : v.blocks()) {
            const Matrix* b = m.block(q);
            if (b == nullptr) continue;
            if (b->rows() != x.size())
                throw std::invalid_argument("graded_matvec: dimension mismatch in sector " +
                                            std::to_string(q));
            out.set_block(q + shift, b->transpose() * x);
        }
    } else {
        for (const auto& [q, x] : v.blocks()) {
            const Matrix* b = m.block(q - shift);
            if (b == nullptr) continue;
            if (b->cols() != x.size())
                throw std::invalid_argument("graded_matvec: dimension mismatch in sector " +
                                            std::to_string(q));
            out.set_block(q - shift, (*b) * x);
        }
    }
    return out;
}

// Schmidt coefficients on one bond, per sector, each sector sorted descending.
class SchmidtSpectrum {
  public:
    struct Entry {
        Charge q;
        Index index;
        double weight;
    };

    SchmidtSpectrum() = default;
    explicit SchmidtSpectrum(std::map<Charge, RealVector> sectors) : sectors_(std::move(sectors)) {
        for (const auto& [q, v] : sectors_)
            for (Index i = 0; i < v.size(); ++i)
                if (!(v(i) >= 0.0))
                    throw std::invalid_argument("SchmidtSpectrum: negative or NaN weight");
    }

    const std::map<Charge, RealVector>& sectors() const { return sectors_; }
    const RealVector& sector(Charge q) const { return sectors_.at(q); }

    SectorDims dims() const {
        SectorDims d;
        for (const auto& [q, v] : sectors_) d[q] = v.size();
        return d;
    }

    Index size() const {
        Index n = 0;
        for (const auto& [q, v] : sectors_) n += v.size();
        return n;
    }

    double total_weight() const {
        double s = 0.0;
        for (const auto& [q, v] : sectors_) s += v.squaredNorm();
        return s;
    }

    void normalize() {
        const double n = std::sqrt(total_weight());
        if (n == 0.0) throw NumericalError("SchmidtSpectrum::normalize: zero spectrum");
        for (auto& [q, v] : sectors_) v /= n;
    }

    double entropy() const {
        double s = 0.0;
        for (const auto& [q, v] : sectors_)
            for (Index i = 0; i < v.size(); ++i) {
                const double p = v(i) * v(i);
                if (p > 0.0) s -= p * std::log(p);
            }
        return s;
    }

    // All entries in one list, largest first. Ties go to the charge closer to
    // zero, then to the more negative charge, then to the lower index.
    std::vector<Entry> merged() const {
        std::vector<Entry> all;
        all.reserve(static_cast<std::size_t>(size()));
        for (const auto& [q, v] : sectors_)
            for (Index i = 0; i < v.size(); ++i) all.push_back({q, i, v(i)});
        std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
            if (a.weight != b.weight) return a.weight > b.weight;
            if (std::abs(a.q) != std::abs(b.q)) return std::abs(a.q) < std::abs(b.q);
            if (a.q != b.q) return a.q < b.q;
            return a.index < b.index;
        });
        return all;
    }

  private:
    std::map<Charge, RealVector> sectors_;
};

struct TruncationReport {
    double discarded_weight = 0.0;
    std::map<Charge, Index> kept_per_sector;
    Index largest_block_dim = 0;
};

// Keeps the k_max globally largest coefficients. Kept coefficients of each
// sector form a prefix of that sector's list. The discarded weight is reported
// before the kept spectrum is renormalized to unit norm.
inline std::pair<SchmidtSpectrum, TruncationReport> merged_truncate(const SchmidtSpectrum& lambda,
                                                                    Index k_max) {
    if (k_max < 1) throw std::invalid_argument("merged_truncate: k_max must be >= 1");
    TruncationReport report;
    std::map<Charge, Index> keep;
    for (const auto& [q, v] : lambda.sectors()) keep[q] = 0;

    const auto all = lambda.merged();
    const std::size_t n_keep = std::min<std::size_t>(all.size(), static_cast<std::size_t>(k_max));
    for (std::size_t i = 0; i < n_keep; ++i) keep[all[i].q] += 1;
    for (std::size_t i = n_keep; i < all.size(); ++i)
        report.discarded_weight += all[i].weight * all[i].weight;

    std::map<Charge, RealVector> kept;
    for (const auto& [q, v] : lambda.sectors()) {
        // Prefix property: within a sector the tie rule degenerates to index order.
        const Index n = keep[q];
        if (n == 0) continue;
        kept[q] = v.head(n);
        report.kept_per_sector[q] = n;
    }
    SchmidtSpectrum out(std::move(kept));
    if (out.size() > 0 && report.discarded_weight > 0.0) out.normalize();
    return {std::move(out), std::move(report)};
}

struct BlockSvd {
    GradedMatrix x;          // rows: theta rows, cols: new bond (shift 0)
    SchmidtSpectrum lambda;  // keyed by theta row charge
    GradedMatrix y;          // rows: new bond, cols: theta cols (theta's shift)
};

// Per-sector SVD theta_q = X_q diag(lambda_q) Y_q. The largest-magnitude entry of
// every left singular vector is made real positive. Singular values below
// drop_relative times the overall largest one are removed.
inline BlockSvd block_svd(const GradedMatrix& theta, double drop_relative = 1e-14) {
    struct Raw {
        Matrix u;
        RealVector s;
        Matrix vh;
    };
    std::map<Charge, Raw> raw;
    double smax = 0.0;
    for (const auto& [q, m] : theta.blocks()) {
        if (m.size() == 0) continue;
        if (!m.allFinite()) {
            std::ostringstream msg;
            msg << "block_svd: non-finite input in sector " << q << " (" << m.rows() << "x"
                << m.cols() << ")";
            throw NumericalError(msg.str());
        }
        Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.info() != Eigen::Success || !svd.singularValues().allFinite()) {
            std::ostringstream msg;
            msg << "block_svd: SVD failed to converge in sector " << q << " (" << m.rows() << "x"
                << m.cols() << ")";
            throw NumericalError(msg.str());
        }
        Raw r{svd.matrixU(), svd.singularValues(), svd.matrixV().adjoint()};
        if (r.s.size() > 0) smax = std::max(smax, r.s(0));
        raw.emplace(q, std::move(r));
    }

    SectorDims mid;
    std::map<Charge, RealVector> values;
    const double cut = drop_relative * smax;
    for (auto& [q, r] : raw) {
        Index n = 0;
        while (n < r.s.size() && r.s(n) > cut) ++n;
        if (n == 0) continue;
        mid[q] = n;
        values[q] = r.s.head(n);
    }

    BlockSvd out{GradedMatrix(theta.row_space(), mid, 0), SchmidtSpectrum(values),
                 GradedMatrix(mid, theta.col_space(), theta.charge_shift())};
    for (auto& [q, r] : raw) {
        auto it = mid.find(q);
        if (it == mid.end()) continue;
        const Index n = it->second;
        Matrix u = r.u.leftCols(n);
        Matrix vh = r.vh.topRows(n);
        for (Index j = 0; j < n; ++j) {
            Index imax = 0;
            u.col(j).cwiseAbs().maxCoeff(&imax);
            const Complex z = u(imax, j);
            const double a = std::abs(z);
            if (a == 0.0) continue;
            const Complex phase = z / a;
            u.col(j) *= std::conj(phase);
            vh.row(j) *= phase;
            u(imax, j) = a;
        }
        out.x.set_block(q, std::move(u));
        out.y.set_block(q, std::move(vh));
    }
    return out;
}

} // namespace lcmps
