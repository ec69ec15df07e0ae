#include "interlace/error.hpp"

namespace interlace {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::UnboundedStop: return "UnboundedStop";
    case ErrorCode::RangeOverrun: return "RangeOverrun";
    case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorCode::DpBudget: return "DpBudget";
    case ErrorCode::QuadBudget: return "QuadBudget";
    case ErrorCode::SolveFailed: return "SolveFailed";
    case ErrorCode::NegativeMass: return "NegativeMass";
    case ErrorCode::ChainBudget: return "ChainBudget";
    case ErrorCode::NotConnected: return "NotConnected";
    case ErrorCode::KillBudget: return "KillBudget";
    case ErrorCode::NotInSet: return "NotInSet";
    case ErrorCode::RayEmpty: return "RayEmpty";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::SparseRange: return "SparseRange";
    case ErrorCode::SlabBudget: return "SlabBudget";
    case ErrorCode::Clobber: return "Clobber";
    case ErrorCode::MixedConfig: return "MixedConfig";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::FormatError: return "FormatError";
  }
  return "Unknown";
}

}  // namespace interlace
