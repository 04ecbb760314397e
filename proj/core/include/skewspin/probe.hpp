#pragma once

#include "skewspin/fields.hpp"

#include <any>
#include <unordered_map>

namespace sks {

// Local evaluation stencil around one sample point. Nodes live at
// x0 + h * offset for small integer offsets and are memoized, so nested
// central differences reuse every evaluation.
template <int N>
class Probe {
public:
    using Off = std::array<int, N>;

    Probe(const Candidate<N>& cand, const Vec<N>& x0) : cand_(cand), x0_(x0), h_(cand.chart.h) {}

    const Candidate<N>& candidate() const { return cand_; }
    const Vec<N>& base_point() const { return x0_; }
    double h() const { return h_; }
    static Off origin() { return Off{}; }

    static Off shift(Off o, int k, int d) {
        o[k] += d;
        return o;
    }

    Vec<N> point(const Off& o) const {
        Vec<N> x = x0_;
        for (int k = 0; k < N; ++k) x(k) += h_ * o[k];
        return x;
    }

    template <class T, class Fn>
    const T& memo(int tag, const Off& o, Fn&& compute) {
        const uint64_t key = (uint64_t(tag) << 32) | offset_key(o);
        auto it = cache_.find(key);
        if (it == cache_.end()) it = cache_.emplace(key, std::any(T(compute()))).first;
        return std::any_cast<const T&>(it->second);
    }

    const FrameData<N>& frame(const Off& o) {
        return memo<FrameData<N>>(kFrame, o, [&] { return frame_data<N>(cand_.chart, point(o)); });
    }
    const CurvatureData<N>& curvature(const Off& o) {
        return memo<CurvatureData<N>>(kCurv, o, [&] {
            const auto jet = cand_.chart.jet(point(o), 2);
            return curvature_from_jet<N>(jet, frame(o));
        });
    }
    const Spinor<N>& psi(const Off& o) {
        return memo<Spinor<N>>(kPsi, o, [&] { return cand_.psi(point(o)); });
    }
    const Mat<N>& A(const Off& o) {
        return memo<Mat<N>>(kA, o, [&] { return cand_.A(point(o)); });
    }

    // e_a(q) by central differences in coordinates.
    template <class Fn>
    auto D(const Off& o, int a, Fn&& q) {
        const FrameData<N>& F = frame(o);
        using T = std::decay_t<decltype(q(o))>;
        T acc = (q(shift(o, 0, 1)) - q(shift(o, 0, -1))) * (F.E(0, a) / (2 * h_));
        for (int k = 1; k < N; ++k) acc += (q(shift(o, k, 1)) - q(shift(o, k, -1))) * (F.E(k, a) / (2 * h_));
        return acc;
    }

    template <class Fn>
    Vec<N> cov_vec(const Off& o, int a, Fn&& V) {
        return D(o, a, V) + frame(o).Theta[a] * V(o);
    }
    template <class Fn>
    Mat<N> cov_end(const Off& o, int a, Fn&& B) {
        const Mat<N>& Th = frame(o).Theta[a];
        const Mat<N> b = B(o);
        return D(o, a, B) + Th * b - b * Th;
    }
    template <class Fn>
    Spinor<N> cov_spinor(const Off& o, int a, Fn&& phi) {
        return D(o, a, phi) + 0.5 * (endo_action<N>(frame(o).Theta[a]) * phi(o));
    }

    Spinor<N> nabla_psi(const Off& o, int a) {
        return cov_spinor(o, a, [&](const Off& p) { return psi(p); });
    }
    Mat<N> nabla_A(const Off& o, int a) {
        return cov_end(o, a, [&](const Off& p) { return A(p); });
    }

    size_t node_count() const { return cache_.size(); }

    enum : int { kFrame = 1, kCurv, kPsi, kA, kUser = 16 };

private:
    static uint64_t offset_key(const Off& o) {
        uint64_t k = 0;
        for (int i = 0; i < N; ++i) k = (k << 8) | uint64_t(uint8_t(int8_t(o[i])));
        return k;
    }

    const Candidate<N>& cand_;
    Vec<N> x0_;
    double h_;
    std::unordered_map<uint64_t, std::any> cache_;
};

}  // namespace sks
