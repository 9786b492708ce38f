#include "uncproxy/error.hpp"

namespace uncproxy {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_input: return "invalid-input";
        case ErrorKind::empty_input: return "empty-input";
        case ErrorKind::degenerate_input: return "degenerate-input";
        case ErrorKind::parse: return "parse";
        case ErrorKind::schema_mismatch: return "schema-mismatch";
        case ErrorKind::unlabeled_sample: return "unlabeled-sample";
        case ErrorKind::join: return "join";
        case ErrorKind::invalid_coverage: return "invalid-coverage";
        case ErrorKind::training_diverged: return "training-diverged";
        case ErrorKind::io: return "io";
        case ErrorKind::format: return "format";
        case ErrorKind::usage: return "usage";
    }
    return "unknown";
}

}  // namespace uncproxy
