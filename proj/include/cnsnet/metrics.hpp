#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cnsnet/error.hpp"
#include "cnsnet/recognition.hpp"

namespace cnsnet {

struct DetectionCounts {
    std::int64_t tp_k = 0; // known instance accepted as known
    std::int64_t fn_k = 0; // known instance rejected as unknown
    std::int64_t tn_u = 0; // unknown instance rejected as unknown
    std::int64_t fp_u = 0; // unknown instance accepted as known
};

struct DetectionRates {
    double tpr_known = 0.0;
    double tnr_unknown = 0.0;
    double d_acc = 0.0;
};

// Accuracy over known test instances. A known instance rejected as unknown
// counts as incorrect: it cannot be the right family.
inline double classification_accuracy(const std::vector<RecognitionOutcome>& outcomes,
                                      const std::vector<int>& labels) {
    if (outcomes.empty()) throw UndefinedMetric("classification accuracy over an empty set");
    if (outcomes.size() != labels.size())
        throw InvalidInput("classification_accuracy: outcome/label count mismatch");
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i)
        if (!outcomes[i].is_unknown && outcomes[i].family == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(outcomes.size());
}

// Secondary figure: accuracy conditioned on acceptance. NaN when everything
// was rejected.
inline double classification_accuracy_conditional(const std::vector<RecognitionOutcome>& outcomes,
                                                  const std::vector<int>& labels) {
    if (outcomes.empty()) throw UndefinedMetric("classification accuracy over an empty set");
    std::int64_t correct = 0, accepted = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].is_unknown) continue;
        ++accepted;
        if (outcomes[i].family == labels[i]) ++correct;
    }
    if (accepted == 0) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(correct) / static_cast<double>(accepted);
}

inline DetectionCounts detection_counts(const std::vector<RecognitionOutcome>& outcomes,
                                        const std::vector<bool>& truly_unknown) {
    if (outcomes.size() != truly_unknown.size())
        throw InvalidInput("detection_counts: outcome/flag count mismatch");
    DetectionCounts c;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (truly_unknown[i])
            outcomes[i].is_unknown ? ++c.tn_u : ++c.fp_u;
        else
            outcomes[i].is_unknown ? ++c.fn_k : ++c.tp_k;
    }
    return c;
}

inline DetectionRates detection_rates_from_counts(const DetectionCounts& c) {
    if (c.tp_k + c.fn_k == 0) throw UndefinedMetric("TPR over an empty known population");
    if (c.tn_u + c.fp_u == 0) throw UndefinedMetric("TNR over an empty unknown population");
    DetectionRates r;
    const double nk = static_cast<double>(c.tp_k + c.fn_k);
    const double nu = static_cast<double>(c.tn_u + c.fp_u);
    r.tpr_known = static_cast<double>(c.tp_k) / nk;
    r.tnr_unknown = static_cast<double>(c.tn_u) / nu;
    // the mean of the two rates, evaluated as one ratio so clean count
    // combinations land on clean decimals
    r.d_acc = (static_cast<double>(c.tp_k) * nu + static_cast<double>(c.tn_u) * nk) /
              (2.0 * nk * nu);
    return r;
}

inline DetectionRates detection_rates(const std::vector<RecognitionOutcome>& outcomes,
                                      const std::vector<bool>& truly_unknown) {
    return detection_rates_from_counts(detection_counts(outcomes, truly_unknown));
}

// k x k counts, entry [predicted][truth]; known instances rejected as unknown
// are excluded from the matrix and tallied per true family instead.
struct ConfusionMatrix {
    int k = 0;
    std::vector<std::int64_t> cells;               // row-major, predicted * k + truth
    std::vector<std::int64_t> rejected_per_family; // unknown-rejections of known instances

    std::int64_t at(int predicted, int truth) const {
        return cells[static_cast<std::size_t>(predicted * k + truth)];
    }
};

inline ConfusionMatrix confusion_matrix(const std::vector<RecognitionOutcome>& outcomes,
                                        const std::vector<int>& labels, int k) {
    if (outcomes.size() != labels.size())
        throw InvalidInput("confusion_matrix: outcome/label count mismatch");
    ConfusionMatrix m;
    m.k = k;
    m.cells.assign(static_cast<std::size_t>(k) * static_cast<std::size_t>(k), 0);
    m.rejected_per_family.assign(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const int truth = labels[i];
        if (truth < 0 || truth >= k) throw InvalidInput("confusion_matrix: label outside [0,k)");
        if (outcomes[i].is_unknown) {
            ++m.rejected_per_family[static_cast<std::size_t>(truth)];
        } else {
            ++m.cells[static_cast<std::size_t>(outcomes[i].family * k + truth)];
        }
    }
    return m;
}

struct MetricsReport {
    double c_acc = 0.0;
    double c_acc_conditional = 0.0;
    bool detection_available = false;
    DetectionRates rates;
    DetectionCounts counts;
    ConfusionMatrix confusion;
    double threshold = 0.0;
    std::string config_digest;
};

// Assembles the full report for a known test population plus an (optionally
// empty) unknown test population.
inline MetricsReport build_metrics_report(const std::vector<RecognitionOutcome>& known_outcomes,
                                          const std::vector<int>& known_labels,
                                          const std::vector<RecognitionOutcome>& unknown_outcomes,
                                          int k, double threshold,
                                          const std::string& config_digest) {
    MetricsReport report;
    report.c_acc = classification_accuracy(known_outcomes, known_labels);
    report.c_acc_conditional = classification_accuracy_conditional(known_outcomes, known_labels);
    report.confusion = confusion_matrix(known_outcomes, known_labels, k);
    report.threshold = threshold;
    report.config_digest = config_digest;
    if (!unknown_outcomes.empty()) {
        std::vector<RecognitionOutcome> all = known_outcomes;
        all.insert(all.end(), unknown_outcomes.begin(), unknown_outcomes.end());
        std::vector<bool> flags(known_outcomes.size(), false);
        flags.insert(flags.end(), unknown_outcomes.size(), true);
        report.counts = detection_counts(all, flags);
        report.rates = detection_rates_from_counts(report.counts);
        report.detection_available = true;
    }
    return report;
}

} // namespace cnsnet
