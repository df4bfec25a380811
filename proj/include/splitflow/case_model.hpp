#pragma once

// Network data model, MATPOWER case I/O and topology edits.
//
// All electrical quantities are stored per-unit on NetworkCase::base_mva and
// all angles in radians. A NetworkCase is an immutable value once built;
// apply_outage returns an edited copy.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace splitflow {

using BusId = int;

enum class BusKind { PQ, PV, Slack, Isolated };

struct Bus {
    BusId id = 0;
    BusKind kind = BusKind::PQ;
    double v_set = 1.0;       // setpoint for Slack/PV, file Vm otherwise
    double angle_set = 0.0;   // reference angle, used for Slack
    double v_min = 0.9;
    double v_max = 1.1;
    double gs = 0.0;          // shunt conductance at V = 1 pu
    double bs = 0.0;          // shunt susceptance at V = 1 pu
    double base_kv = 0.0;
    int area = 1;
    int zone = 1;
    double vm_init = 1.0;     // file voltage, usable as a warm start
    double va_init = 0.0;

    bool operator==(const Bus&) const = default;
};

struct Load {
    BusId bus = 0;
    double p_nom = 0.0;
    double q_nom = 0.0;

    bool operator==(const Load&) const = default;
};

struct Generator {
    BusId bus = 0;
    double p_set = 0.0;
    double q_set = 0.0;   // file Qg; the fixed output when the bus acts as PQ
    double v_set = 1.0;
    double q_min = 0.0;
    double q_max = 0.0;
    bool in_service = true;
    double m_base = 100.0;
    double p_max = 0.0;
    double p_min = 0.0;

    bool operator==(const Generator&) const = default;
};

struct Branch {
    BusId from = 0;
    BusId to = 0;
    double r = 0.0;
    double x = 0.0;
    double b = 0.0;
    double tap = 1.0;
    double shift = 0.0;
    double rate_a = 0.0;   // 0 means unlimited
    double rate_b = 0.0;
    double rate_c = 0.0;
    bool in_service = true;
    double ang_min = -2.0 * 3.14159265358979323846;
    double ang_max = 2.0 * 3.14159265358979323846;

    bool operator==(const Branch&) const = default;
};

struct NetworkCase {
    std::string name;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Load> loads;
    std::vector<Generator> generators;
    std::vector<Branch> branches;

    bool operator==(const NetworkCase&) const = default;

    /// Position of a bus in `buses`, or nullopt.
    [[nodiscard]] std::optional<std::size_t> find_bus(BusId id) const;
    [[nodiscard]] const Bus& bus(BusId id) const;
    [[nodiscard]] std::unordered_map<BusId, std::size_t> bus_positions() const;
    [[nodiscard]] std::size_t in_service_branch_count() const;
};

/// Takes every in-service generator at `bus` out of service.
struct GeneratorOutage {
    BusId bus = 0;
    bool operator==(const GeneratorOutage&) const = default;
};

/// `ordinal` selects among parallel circuits between the same bus pair, in
/// file order (0 = first).
struct BranchOutage {
    BusId from = 0;
    BusId to = 0;
    int ordinal = 0;
    bool operator==(const BranchOutage&) const = default;
};

using Outage = std::variant<GeneratorOutage, BranchOutage>;

/// Short element label: "G132" or "B130-131" ("B130-131#2" for ordinal 1).
std::string outage_label(const Outage& outage);
/// Inverse of outage_label; throws CaseError(Syntax) on malformed text.
Outage parse_outage_label(std::string_view text);

class CaseError : public std::runtime_error {
public:
    enum class Code {
        Syntax,
        MissingMatrix,
        DanglingReference,
        MultipleSlack,
        UnknownElement,
        AlreadyOutOfService,
        IslandSplit,
        Io,
    };

    CaseError(Code code, const std::string& message, int line = 0, int column = 0);

    [[nodiscard]] Code code() const noexcept { return code_; }
    [[nodiscard]] int line() const noexcept { return line_; }
    [[nodiscard]] int column() const noexcept { return column_; }

private:
    Code code_;
    int line_;
    int column_;
};

NetworkCase parse_matpower(std::string_view text);
NetworkCase load_matpower_file(const std::string& path);

/// Writes a MATPOWER version 2 case. Values are printed with round-trip
/// precision so parse(serialize(c)) reproduces c up to unit conversion.
std::string serialize_matpower(const NetworkCase& c);

struct Violation {
    std::string element;   // e.g. "bus 4", "branch 3 (1-2)"
    std::string message;
};

std::vector<Violation> validate(const NetworkCase& c);

NetworkCase apply_outage(const NetworkCase& c, const Outage& outage);

/// Ids of non-isolated buses not reachable from the slack bus through
/// in-service branches.
std::vector<BusId> unreachable_from_slack(const NetworkCase& c);

}  // namespace splitflow
