#pragma once

#include <array>
#include <string>
#include <string_view>

#include "xaudit/error.hpp"

namespace xaudit {

// Data-quality issue classes. CornerMarker is a pure shortcut control.
enum class IssueKind { CalibrationShift, PaddingConfound, CircularArtifact, PatientTable, CornerMarker };

inline constexpr std::array<IssueKind, 5> kAllIssueKinds = {IssueKind::CalibrationShift, IssueKind::PaddingConfound,
                                                            IssueKind::CircularArtifact, IssueKind::PatientTable,
                                                            IssueKind::CornerMarker};

inline std::string to_string(IssueKind k) {
    switch (k) {
        case IssueKind::CalibrationShift: return "calibration_shift";
        case IssueKind::PaddingConfound: return "padding";
        case IssueKind::CircularArtifact: return "circular_artifact";
        case IssueKind::PatientTable: return "patient_table";
        case IssueKind::CornerMarker: return "corner_marker";
    }
    return "?";
}

// Accepts the canonical names plus the short CLI spellings.
inline IssueKind parse_issue_kind(std::string_view s, ErrorKind err = ErrorKind::SchemaError) {
    for (auto k : kAllIssueKinds)
        if (s == to_string(k)) return k;
    if (s == "calibration-shift" || s == "calibration") return IssueKind::CalibrationShift;
    if (s == "circle" || s == "circular-artifact") return IssueKind::CircularArtifact;
    if (s == "table" || s == "patient-table") return IssueKind::PatientTable;
    if (s == "corner-marker" || s == "marker") return IssueKind::CornerMarker;
    fail(err, "unknown issue kind '" + std::string(s) + "'");
}

}  // namespace xaudit
