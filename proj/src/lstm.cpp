#include "lstm.hpp"

#include <algorithm>

namespace ordrec::lstm {

double gradient_check_params(ModelParams<double>& params, std::span<const double> x,
                             int label_index, double fd_eps) {
    ForwardCache<double> cache;
    forward(params, x, &cache);
    ModelParams<double> grads(params.cfg);
    backward(params, cache, label_index, grads);

    auto loss_at = [&]() {
        ForwardCache<double> c;
        forward(params, x, &c);
        return double(cross_entropy_from_logits<double>(c.logits, label_index));
    };

    std::vector<std::vector<double>*> tensors, gtensors;
    params.for_each_tensor([&](std::vector<double>& t) { tensors.push_back(&t); });
    grads.for_each_tensor([&](std::vector<double>& t) { gtensors.push_back(&t); });

    double max_rel = 0;
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
        auto& w = *tensors[ti];
        auto& g = *gtensors[ti];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double save = w[i];
            w[i] = save + fd_eps;
            const double lp = loss_at();
            w[i] = save - fd_eps;
            const double lm = loss_at();
            w[i] = save;
            const double numeric = (lp - lm) / (2 * fd_eps);
            const double analytic = g[i];
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

double gradient_check(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams<double> p(cfg);
    init_params(p, seed);
    Rng rng(splitmix64(seed ^ 0xabcdef12ULL));
    std::vector<double> x(std::size_t(cfg.seq_len_in) * std::size_t(cfg.feature_dim));
    for (auto& v : x) v = rng.next_double() * 2.0 - 1.0;
    const int label = int(rng.next_below(std::uint64_t(cfg.n_outputs)));
    return gradient_check_params(p, x, label);
}

}  // namespace ordrec::lstm
