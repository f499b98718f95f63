#pragma once

// NLI evaluation: confusion matrix, accuracy, per-class F1, and token-level
// accuracy for the auxiliary objectives.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lipt/common.hpp"
#include "lipt/dataset.hpp"
#include "lipt/model.hpp"
#include "lipt/types.hpp"

namespace lipt {

using Confusion = std::array<std::array<int64_t, 3>, 3>; // [gold][pred]

// 2PR/(P+R); zero when tp+fp, tp+fn, or P+R is zero.
inline double f1_per_class(const Confusion& confusion, int cls) {
    const auto c = static_cast<size_t>(cls);
    int64_t tp = confusion[c][c];
    int64_t fp = 0, fn = 0;
    for (size_t g = 0; g < 3; ++g)
        if (g != c) fp += confusion[g][c];
    for (size_t p = 0; p < 3; ++p)
        if (p != c) fn += confusion[c][p];
    if (tp + fp == 0 || tp + fn == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

struct Metrics {
    Confusion confusion{};
    double accuracy = 0.0;
    std::array<double, 3> f1{};
    std::array<int64_t, 3> support{};

    int64_t total() const {
        int64_t n = 0;
        for (const auto& row : confusion)
            for (int64_t x : row) n += x;
        return n;
    }
    int64_t correct() const {
        return confusion[0][0] + confusion[1][1] + confusion[2][2];
    }
};

inline Metrics metrics_from_confusion(const Confusion& confusion) {
    Metrics m;
    m.confusion = confusion;
    const int64_t n = m.total();
    if (n == 0) throw Error("metrics: empty confusion matrix");
    m.accuracy = static_cast<double>(m.correct()) / static_cast<double>(n);
    for (int c = 0; c < 3; ++c) {
        m.f1[static_cast<size_t>(c)] = f1_per_class(confusion, c);
        int64_t sup = 0;
        for (size_t p = 0; p < 3; ++p) sup += confusion[static_cast<size_t>(c)][p];
        m.support[static_cast<size_t>(c)] = sup;
    }
    return m;
}

inline Metrics metrics_from_predictions(std::span<const int32_t> predictions,
                                        std::span<const int32_t> golds) {
    if (predictions.size() != golds.size())
        throw Error("metrics: prediction/gold count mismatch");
    Confusion confusion{};
    for (size_t i = 0; i < predictions.size(); ++i) {
        if (golds[i] < 0 || golds[i] > 2 || predictions[i] < 0 || predictions[i] > 2)
            throw Error("metrics: class id out of range");
        ++confusion[static_cast<size_t>(golds[i])][static_cast<size_t>(predictions[i])];
    }
    return metrics_from_confusion(confusion);
}

inline int32_t argmax_row(const double* row, size_t n) {
    size_t best = 0;
    for (size_t i = 1; i < n; ++i)
        if (row[i] > row[best]) best = i;
    return static_cast<int32_t>(best);
}

// Full-testset NLI evaluation; prediction is the argmax of the [CLS] logits
// (identical for both loss kinds), dropout off.
inline Metrics evaluate(const Model& m, std::span<const EncodedSequence> testset,
                        size_t batch_size = 32) {
    if (testset.empty()) throw Error("evaluate: empty test set");
    std::vector<int32_t> preds, golds;
    preds.reserve(testset.size());
    golds.reserve(testset.size());
    ForwardTrace t;
    for (size_t start = 0; start < testset.size(); start += batch_size) {
        const size_t n = std::min(batch_size, testset.size() - start);
        Batch b = make_batch(testset.subspan(start, n));
        forward(m, b, /*train_mode=*/false, t);
        Tensor logits = nli_logits(m, t.hidden, b.batch, b.len);
        for (size_t i = 0; i < b.batch; ++i) {
            preds.push_back(argmax_row(logits.data() + i * kNumNliClasses, kNumNliClasses));
            golds.push_back(b.nli_gold[i]);
        }
    }
    return metrics_from_predictions(preds, golds);
}

// Fraction of label-carrying token positions where the head's argmax equals
// the projected label.
inline double token_accuracy(const Model& m, std::span<const EncodedSequence> data,
                             Objective obj, size_t batch_size = 32) {
    if (data.empty()) throw Error("token_accuracy: empty data");
    int64_t correct = 0, counted = 0;
    ForwardTrace t;
    for (size_t start = 0; start < data.size(); start += batch_size) {
        const size_t n = std::min(batch_size, data.size() - start);
        Batch b = make_batch(data.subspan(start, n));
        auto it = b.labels.find(obj);
        if (it == b.labels.end())
            throw Error(concat("token_accuracy: data has no labels for ", to_string(obj)));
        forward(m, b, /*train_mode=*/false, t);
        Tensor logits = token_logits(m, t.hidden, obj);
        const size_t C = logits.dim(1);
        for (size_t r = 0; r < b.batch * b.len; ++r) {
            if (!b.loss_mask[r] || it->second[r] == kIgnoreLabel) continue;
            ++counted;
            if (argmax_row(logits.data() + r * C, C) == it->second[r]) ++correct;
        }
    }
    if (counted == 0) throw Error("token_accuracy: no labeled positions");
    return static_cast<double>(correct) / static_cast<double>(counted);
}

// Frequency of the most common label among labeled token positions: the
// floor a trained token head must beat.
inline double majority_class_frequency(std::span<const EncodedSequence> data, Objective obj) {
    std::map<int32_t, int64_t> counts;
    int64_t total = 0;
    for (const auto& s : data) {
        auto it = s.labels.find(obj);
        if (it == s.labels.end()) continue;
        for (size_t i = 0; i < it->second.size(); ++i) {
            if (!s.loss_mask[i] || it->second[i] == kIgnoreLabel) continue;
            ++counts[it->second[i]];
            ++total;
        }
    }
    if (total == 0) throw Error("majority_class_frequency: no labeled positions");
    int64_t best = 0;
    for (const auto& [label, c] : counts) best = std::max(best, c);
    return static_cast<double>(best) / static_cast<double>(total);
}

} // namespace lipt
