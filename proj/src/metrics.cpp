#include "tsad/metrics.hpp"

#include "tsad/errors.hpp"

namespace tsad {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
}

void accumulate(ConfusionCounts& c, int predicted, int actual) {
    if ((predicted != 0 && predicted != 1) || (actual != 0 && actual != 1))
        throw ArgumentError("predictions and labels must be 0 or 1");
    if (predicted == 1) {
        actual == 1 ? ++c.tp : ++c.fp;
    } else {
        actual == 1 ? ++c.fn : ++c.tn;
    }
}

Scores scores(const ConfusionCounts& c) {
    Scores s;
    const auto tp = static_cast<double>(c.tp);
    if (c.tp + c.fp == 0) s.degenerate = true;
    else s.precision = tp / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn == 0) s.degenerate = true;
    else s.recall = tp / static_cast<double>(c.tp + c.fn);
    if (s.precision + s.recall > 0.0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    else s.degenerate = true;
    return s;
}

ValidationResult validate(const Policy& policy, AnomalyEnv& env, int episodes) {
    const auto& ds = env.dataset();
    if (ds.num_windows() == 0) throw DataError("validation split is empty");
    if (episodes <= 0) throw ArgumentError("validation needs at least one episode");

    ValidationResult out;
    out.episodes = episodes;
    out.excluded_points = static_cast<std::size_t>(ds.n_steps - 1);
    std::mt19937_64 unused(0);
    const auto length = static_cast<std::size_t>(env.config().episode_length);
    for (int e = 0; e < episodes; ++e) {
        const std::size_t start = (static_cast<std::size_t>(e) * length) % ds.num_windows();
        Vector state = env.reset(start, unused);
        bool done = false;
        while (!done) {
            const int prediction = policy(state);
            auto res = env.step(prediction);
            if (!res.true_label) throw DataError("evaluation requires labels");
            accumulate(out.counts, prediction, *res.true_label);
            out.trace.push_back({e, res.window, ds.end_point(res.window), prediction, *res.true_label});
            done = res.done;
            if (!done) state = std::move(*res.next_state);
        }
    }
    out.scores = scores(out.counts);
    return out;
}

}  // namespace tsad
