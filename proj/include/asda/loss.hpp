#ifndef ASDA_LOSS_HPP
#define ASDA_LOSS_HPP

#include "asda/backbone.hpp"
#include "asda/core.hpp"

#include <vector>

namespace asda {

/// Contrastive loss over one (query, positive, negatives) tuple of
/// descriptors: |q - p|^2 plus, per negative, the squared hinge
/// max(0, tau - |q - n|)^2.
template <typename Scalar>
Scalar contrastive_loss(const Descriptor<Scalar>& rep_q, const Descriptor<Scalar>& rep_p,
                        const std::vector<Descriptor<Scalar>>& rep_n, Scalar tau,
                        ForwardSignature* sig = nullptr) {
    require(tau > Scalar(0), "contrastive loss: margin must be positive");
    require(rep_p.size() == rep_q.size(), "contrastive loss: descriptor dims differ");
    Scalar loss = (rep_q - rep_p).squaredNorm();
    for (const auto& n : rep_n) {
        require(n.size() == rep_q.size(), "contrastive loss: descriptor dims differ");
        const Scalar dist = (rep_q - n).norm();
        const Scalar slack = tau - dist;
        if (sig) {
            sig->note_bit(slack > Scalar(0));
            sig->note_margin(static_cast<double>(slack));
        }
        if (slack > Scalar(0)) loss += slack * slack;
    }
    return loss;
}

template <typename Scalar>
struct ContrastiveGrads {
    Scalar loss = Scalar(0);
    Vector<Scalar> d_query;
    Vector<Scalar> d_positive;
    std::vector<Vector<Scalar>> d_negatives;
};

/// Loss value plus gradients w.r.t. each descriptor. At the hinge kink and
/// at zero negative distance the subgradient 0 is used.
template <typename Scalar>
ContrastiveGrads<Scalar> contrastive_loss_backward(const Descriptor<Scalar>& rep_q,
                                                   const Descriptor<Scalar>& rep_p,
                                                   const std::vector<Descriptor<Scalar>>& rep_n,
                                                   Scalar tau, ForwardSignature* sig = nullptr) {
    ContrastiveGrads<Scalar> out;
    out.loss = contrastive_loss(rep_q, rep_p, rep_n, tau, sig);
    const Vector<Scalar> diff_qp = rep_q - rep_p;
    out.d_query = Scalar(2) * diff_qp;
    out.d_positive = Scalar(-2) * diff_qp;
    out.d_negatives.reserve(rep_n.size());
    for (const auto& n : rep_n) {
        const Vector<Scalar> diff_qn = rep_q - n;
        const Scalar dist = diff_qn.norm();
        const Scalar slack = tau - dist;
        Vector<Scalar> dn = Vector<Scalar>::Zero(rep_q.size());
        if (slack > Scalar(0) && dist > Scalar(0)) {
            const Vector<Scalar> g = (Scalar(2) * slack / dist) * diff_qn;
            out.d_query -= g;
            dn = g;
        }
        out.d_negatives.push_back(std::move(dn));
    }
    return out;
}

}  // namespace asda

#endif
