#pragma once

#include <vector>

namespace mmc {

/// One classifier's verdict for one record and one task. cls indexes the
/// task's class vocabulary; cls < 0 means the modality was missing for the
/// record (no embedding, no categorical inputs), which the evaluation rules
/// treat as a wrong prediction.
struct TaskDecision {
    int cls = -1;
    double confidence = 0.0;

    bool missing() const { return cls < 0; }
};

/// Per-task decisions of one modality for one record, index-aligned with
/// the task schema.
using ModalityDecision = std::vector<TaskDecision>;

}  // namespace mmc
