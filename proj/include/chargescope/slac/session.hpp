#pragma once

#include <chrono>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "chargescope/capture.hpp"
#include "chargescope/slac/messages.hpp"
#include "chargescope/transport.hpp"

namespace chargescope::slac {

// ---------------------------------------------------------------------------
// Basic signaling

enum class CpState { A, B, C };

std::string to_string(CpState s);

struct BasicSignalingEvent {
  CpState cp_state = CpState::A;
  double duty_cycle_pct = 100.0;
};

class ControlPilotError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Abstract control-pilot line shared by the EV harness and the EVSE side.
/// State C (energy transfer permitted) is refused outright: the probe never
/// asks for power.
class ControlPilot {
 public:
  explicit ControlPilot(CaptureLog* log = nullptr) : log_(log) {}

  /// Throws ControlPilotError for state C.
  void apply(const BasicSignalingEvent& ev);
  CpState state() const;
  std::vector<BasicSignalingEvent> history() const;

 private:
  mutable std::mutex mu_;
  CpState state_ = CpState::A;
  std::vector<BasicSignalingEvent> history_;
  CaptureLog* log_;
};

// ---------------------------------------------------------------------------
// EV-side matching

enum class SlacState { Idle, ParmSent, Sounding, AttenReceived, MatchSent, Matched, Failed };

std::string to_string(SlacState s);

/// True when `to` may follow `from`. Failed is reachable from any
/// non-terminal state; everything else moves strictly forward by one step.
bool is_allowed_transition(SlacState from, SlacState to);

struct SlacConfig {
  MacAddress ev_mac = {0x02, 0x00, 0x00, 0x00, 0x00, 0x01};
  RunId run_id{};
  int num_sounds = 10;
  Millis stage_timeout{600};
};

struct SlacSession {
  RunId run_id{};
  MacAddress ev_mac{};
  MacAddress evse_mac{};
  SlacState state = SlacState::Idle;
  std::vector<SlacState> history{SlacState::Idle};
  std::vector<std::uint8_t> attenuation_profile;
  std::optional<Nid> nid;
  std::optional<Nmk> nmk;
  std::optional<SlacState> failed_stage;
  std::string failure_reason;

  /// Throws std::logic_error when the move breaks the declared order.
  void transition(SlacState to);
};

/// Runs the EV side of SLAC over `link`. Requires the control pilot to be in
/// state B. Frames carrying a foreign run_id are logged and ignored.
SlacSession run_slac_ev(MessageChannel& link, const SlacConfig& config, const ControlPilot& cp,
                        CaptureLog& log);

// ---------------------------------------------------------------------------
// EVSE-side responder

enum class SlacFault { none, no_parm_cnf, wrong_run_id };

std::string to_string(SlacFault f);
SlacFault slac_fault_from_string(const std::string& s);

struct EvseSlacConfig {
  MacAddress evse_mac = {0x02, 0x00, 0x00, 0x00, 0x00, 0x02};
  Nid nid{};
  Nmk nmk{};
  std::uint8_t attenuation_db = 25;
  int num_sounds = 10;
  SlacFault fault = SlacFault::none;
  Millis wait_timeout{3000};
};

struct EvseSlacResult {
  bool matched = false;
  MacAddress ev_mac{};
  RunId run_id{};
  int sounds_received = 0;
  std::string detail;
};

/// Answers one EV's SLAC attempt as the matching EVSE.
EvseSlacResult run_slac_evse(MessageChannel& link, const EvseSlacConfig& config,
                             CaptureLog& log);

}  // namespace chargescope::slac
