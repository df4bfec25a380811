#include "splitflow/case_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <set>
#include <sstream>

namespace splitflow {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kDefaultVmin = 0.9;
constexpr double kDefaultVmax = 1.1;

// ---------------------------------------------------------------------------
// MATPOWER text scanner
// ---------------------------------------------------------------------------

struct Matrix {
    std::vector<std::vector<double>> rows;
    int line = 0;
};

class Scanner {
public:
    explicit Scanner(std::string_view text) : text_(text) {}

    [[nodiscard]] bool eof() const { return pos_ >= text_.size(); }
    [[nodiscard]] char peek() const { return eof() ? '\0' : text_[pos_]; }
    [[nodiscard]] int line() const { return line_; }
    [[nodiscard]] int column() const { return static_cast<int>(pos_ - line_start_) + 1; }

    char get() {
        const char c = text_[pos_++];
        if (c == '\n') {
            ++line_;
            line_start_ = pos_;
        }
        return c;
    }

    void skip_line() {
        while (!eof() && peek() != '\n') get();
    }

    // Skips blanks and comments, optionally stopping at newlines.
    void skip_space(bool stop_at_newline) {
        while (!eof()) {
            const char c = peek();
            if (c == '%') {
                skip_line();
            } else if (c == '.' && text_.substr(pos_, 3) == "...") {
                // MATLAB continuation: the rest of the line is ignored.
                skip_line();
                if (!eof()) get();
            } else if (c == '\n' && stop_at_newline) {
                return;
            } else if (std::isspace(static_cast<unsigned char>(c)) != 0) {
                get();
            } else {
                return;
            }
        }
    }

    std::string_view identifier() {
        const std::size_t start = pos_;
        while (!eof()) {
            const char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '.') {
                get();
            } else {
                break;
            }
        }
        return text_.substr(start, pos_ - start);
    }

    [[noreturn]] void fail(const std::string& what) const {
        std::ostringstream msg;
        msg << "line " << line_ << ", column " << column() << ": " << what;
        throw CaseError(CaseError::Code::Syntax, msg.str(), line_, column());
    }

    void expect(char c) {
        skip_space(false);
        if (peek() != c) fail(std::string("expected '") + c + "'");
        get();
    }

    double number() {
        const std::size_t start = pos_;
        while (!eof()) {
            const char c = peek();
            if (std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '.' || c == '+' ||
                c == '-') {
                get();
            } else {
                break;
            }
        }
        std::string_view tok = text_.substr(start, pos_ - start);
        if (tok.empty()) fail("expected a number");
        bool negative = false;
        std::string_view body = tok;
        if (body.front() == '-' || body.front() == '+') {
            negative = body.front() == '-';
            body.remove_prefix(1);
        }
        if (body == "Inf" || body == "inf") {
            return negative ? -std::numeric_limits<double>::infinity()
                            : std::numeric_limits<double>::infinity();
        }
        if (body == "NaN" || body == "nan") return std::numeric_limits<double>::quiet_NaN();
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
        if (ec != std::errc() || ptr != body.data() + body.size()) {
            fail("invalid number '" + std::string(tok) + "'");
        }
        return negative ? -value : value;
    }

    Matrix matrix() {
        Matrix m;
        m.line = line_;
        const int open_line = line_;
        const int open_col = column();
        expect('[');
        std::vector<double> row;
        auto finish_row = [&] {
            if (row.empty()) return;
            if (!m.rows.empty() && m.rows.front().size() != row.size()) {
                fail("row has " + std::to_string(row.size()) + " columns, expected " +
                     std::to_string(m.rows.front().size()));
            }
            m.rows.push_back(std::move(row));
            row.clear();
        };
        while (true) {
            skip_space(true);
            if (eof()) {
                throw CaseError(CaseError::Code::Syntax,
                                "line " + std::to_string(open_line) + ", column " +
                                    std::to_string(open_col) + ": unterminated matrix",
                                open_line, open_col);
            }
            const char c = peek();
            if (c == ']') {
                get();
                finish_row();
                return m;
            }
            if (c == ';' || c == '\n') {
                get();
                finish_row();
            } else if (c == ',') {
                get();
            } else {
                row.push_back(number());
            }
        }
    }

    // Skips a bracketed value of any kind, honouring quoted strings.
    void skip_value() {
        skip_space(false);
        const char open = peek();
        if (open != '[' && open != '{') {
            // scalar or string up to ';' or end of line
            while (!eof() && peek() != ';' && peek() != '\n') {
                if (peek() == '%') break;
                get();
            }
            return;
        }
        const int open_line = line_;
        const int open_col = column();
        int depth = 0;
        bool quoted = false;
        while (!eof()) {
            const char c = get();
            if (quoted) {
                if (c == '\'') quoted = false;
                continue;
            }
            if (c == '\'') {
                quoted = true;
            } else if (c == '%') {
                skip_line();
            } else if (c == '[' || c == '{') {
                ++depth;
            } else if (c == ']' || c == '}') {
                if (--depth == 0) return;
            }
        }
        throw CaseError(CaseError::Code::Syntax,
                        "line " + std::to_string(open_line) + ", column " +
                            std::to_string(open_col) + ": unterminated value",
                        open_line, open_col);
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::size_t line_start_ = 0;
};

void require_columns(const Matrix& m, std::size_t n, const char* name) {
    if (!m.rows.empty() && m.rows.front().size() < n) {
        throw CaseError(CaseError::Code::Syntax,
                        "line " + std::to_string(m.line) + ": " + name + " matrix needs at least " +
                            std::to_string(n) + " columns",
                        m.line, 1);
    }
}

BusKind kind_from_matpower(double type, int line) {
    switch (static_cast<int>(type)) {
        case 1: return BusKind::PQ;
        case 2: return BusKind::PV;
        case 3: return BusKind::Slack;
        case 4: return BusKind::Isolated;
        default:
            throw CaseError(CaseError::Code::Syntax,
                            "line " + std::to_string(line) + ": unknown bus type " +
                                std::to_string(type),
                            line, 1);
    }
}

int matpower_type(BusKind k) {
    switch (k) {
        case BusKind::PQ: return 1;
        case BusKind::PV: return 2;
        case BusKind::Slack: return 3;
        case BusKind::Isolated: return 4;
    }
    return 1;
}

void append_number(std::string& out, double v) {
    if (std::isinf(v)) {
        out += v > 0 ? "Inf" : "-Inf";
        return;
    }
    if (std::isnan(v)) {
        out += "NaN";
        return;
    }
    if (v == 0.0) v = 0.0;  // drop negative zero
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
}

// Promotes the PV bus with the largest in-service generation to slack.
void reassign_slack(NetworkCase& c, BusId old_slack) {
    std::map<BusId, double> gen_by_bus;
    for (const auto& g : c.generators) {
        if (g.in_service) gen_by_bus[g.bus] += g.p_set;
    }
    std::optional<BusId> best;
    double best_p = -std::numeric_limits<double>::infinity();
    for (const auto& b : c.buses) {
        if (b.kind != BusKind::PV) continue;
        const auto it = gen_by_bus.find(b.id);
        if (it == gen_by_bus.end()) continue;
        if (it->second > best_p) {
            best_p = it->second;
            best = b.id;
        }
    }
    if (!best) {
        throw CaseError(CaseError::Code::IslandSplit,
                        "generator outage at slack bus " + std::to_string(old_slack) +
                            " leaves no voltage-controlled bus to take over");
    }
    for (auto& b : c.buses) {
        if (b.id == old_slack) b.kind = BusKind::PQ;
        if (b.id == *best) {
            b.kind = BusKind::Slack;
            b.angle_set = b.va_init;
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------

CaseError::CaseError(Code code, const std::string& message, int line, int column)
    : std::runtime_error(message), code_(code), line_(line), column_(column) {}

std::optional<std::size_t> NetworkCase::find_bus(BusId id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == id) return i;
    }
    return std::nullopt;
}

const Bus& NetworkCase::bus(BusId id) const {
    const auto pos = find_bus(id);
    if (!pos) {
        throw CaseError(CaseError::Code::UnknownElement, "unknown bus " + std::to_string(id));
    }
    return buses[*pos];
}

std::unordered_map<BusId, std::size_t> NetworkCase::bus_positions() const {
    std::unordered_map<BusId, std::size_t> map;
    map.reserve(buses.size());
    for (std::size_t i = 0; i < buses.size(); ++i) map.emplace(buses[i].id, i);
    return map;
}

std::size_t NetworkCase::in_service_branch_count() const {
    return static_cast<std::size_t>(
        std::count_if(branches.begin(), branches.end(), [](const Branch& b) { return b.in_service; }));
}

std::string outage_label(const Outage& outage) {
    if (const auto* g = std::get_if<GeneratorOutage>(&outage)) {
        return "G" + std::to_string(g->bus);
    }
    const auto& b = std::get<BranchOutage>(outage);
    std::string s = "B" + std::to_string(b.from) + "-" + std::to_string(b.to);
    if (b.ordinal > 0) s += "#" + std::to_string(b.ordinal + 1);
    return s;
}

Outage parse_outage_label(std::string_view text) {
    auto bad = [&] {
        throw CaseError(CaseError::Code::Syntax, "malformed outage label '" + std::string(text) + "'");
    };
    auto read_int = [&](std::string_view s, int& out) {
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        if (ec != std::errc() || ptr != s.data() + s.size()) bad();
    };
    if (text.size() < 2) bad();
    const std::string_view body = text.substr(1);
    if (text.front() == 'G') {
        GeneratorOutage g;
        read_int(body, g.bus);
        return g;
    }
    if (text.front() != 'B') bad();
    BranchOutage b;
    std::string_view ends = body;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) {
        int circuit = 0;
        read_int(body.substr(hash + 1), circuit);
        if (circuit < 1) bad();
        b.ordinal = circuit - 1;
        ends = body.substr(0, hash);
    }
    const auto dash = ends.find('-', 1);
    if (dash == std::string_view::npos) bad();
    read_int(ends.substr(0, dash), b.from);
    read_int(ends.substr(dash + 1), b.to);
    return b;
}

NetworkCase parse_matpower(std::string_view text) {
    Scanner sc(text);
    NetworkCase c;
    std::optional<double> base_mva;
    std::optional<Matrix> bus_m, gen_m, branch_m;

    while (true) {
        sc.skip_space(false);
        if (sc.eof()) break;
        const char ch = sc.peek();
        if (ch == ';') {
            sc.get();
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(ch)) == 0) {
            sc.fail(std::string("unexpected character '") + ch + "'");
        }
        const std::string_view ident = sc.identifier();
        if (ident == "function") {
            // function mpc = name
            sc.skip_space(true);
            const std::string_view out = sc.identifier();
            sc.skip_space(true);
            if (sc.peek() == '=') {
                sc.get();
                sc.skip_space(true);
                c.name = std::string(sc.identifier());
            } else {
                c.name = std::string(out);
            }
            sc.skip_line();
            continue;
        }
        if (ident == "end" || ident == "return") {
            continue;
        }
        if (ident.rfind("mpc.", 0) != 0) {
            sc.fail("unexpected statement '" + std::string(ident) + "'");
        }
        const std::string_view field = ident.substr(4);
        sc.expect('=');
        sc.skip_space(false);
        if (field == "baseMVA") {
            base_mva = sc.number();
        } else if (field == "bus") {
            bus_m = sc.matrix();
        } else if (field == "gen") {
            gen_m = sc.matrix();
        } else if (field == "branch") {
            branch_m = sc.matrix();
        } else {
            sc.skip_value();
        }
    }

    if (!base_mva) throw CaseError(CaseError::Code::MissingMatrix, "missing mpc.baseMVA");
    if (!bus_m) throw CaseError(CaseError::Code::MissingMatrix, "missing mpc.bus matrix");
    if (!gen_m) throw CaseError(CaseError::Code::MissingMatrix, "missing mpc.gen matrix");
    if (!branch_m) throw CaseError(CaseError::Code::MissingMatrix, "missing mpc.branch matrix");
    require_columns(*bus_m, 13, "bus");
    require_columns(*gen_m, 10, "gen");
    require_columns(*branch_m, 11, "branch");

    const double base = *base_mva;
    if (!(base > 0.0)) {
        throw CaseError(CaseError::Code::Syntax, "baseMVA must be positive");
    }
    c.base_mva = base;

    std::set<BusId> ids;
    for (const auto& row : bus_m->rows) {
        Bus b;
        b.id = static_cast<BusId>(row[0]);
        if (!ids.insert(b.id).second) {
            throw CaseError(CaseError::Code::Syntax, "duplicate bus id " + std::to_string(b.id));
        }
        b.kind = kind_from_matpower(row[1], bus_m->line);
        b.gs = row[4] / base;
        b.bs = row[5] / base;
        b.area = static_cast<int>(row[6]);
        b.vm_init = row[7];
        b.va_init = row[8] * kDegToRad;
        b.base_kv = row[9];
        b.zone = static_cast<int>(row[10]);
        b.v_max = row[11];
        b.v_min = row[12];
        if (!(b.v_min < b.v_max) || b.v_max <= 0.0) {
            b.v_min = kDefaultVmin;
            b.v_max = kDefaultVmax;
        }
        b.v_set = b.vm_init;
        b.angle_set = b.va_init;
        c.buses.push_back(b);
        if (row[2] != 0.0 || row[3] != 0.0) {
            c.loads.push_back(Load{b.id, row[2] / base, row[3] / base});
        }
    }

    for (const auto& row : gen_m->rows) {
        Generator g;
        g.bus = static_cast<BusId>(row[0]);
        if (!ids.contains(g.bus)) {
            throw CaseError(CaseError::Code::DanglingReference,
                            "generator references unknown bus " + std::to_string(g.bus));
        }
        g.p_set = row[1] / base;
        g.q_set = row[2] / base;
        g.q_max = row[3] / base;
        g.q_min = row[4] / base;
        g.v_set = row[5];
        g.m_base = row[6];
        g.in_service = row[7] > 0.0;
        g.p_max = row[8] / base;
        g.p_min = row[9] / base;
        c.generators.push_back(g);
    }

    for (const auto& row : branch_m->rows) {
        Branch br;
        br.from = static_cast<BusId>(row[0]);
        br.to = static_cast<BusId>(row[1]);
        for (const BusId end : {br.from, br.to}) {
            if (!ids.contains(end)) {
                throw CaseError(CaseError::Code::DanglingReference,
                                "branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                    " references unknown bus " + std::to_string(end));
            }
        }
        br.r = row[2];
        br.x = row[3];
        br.b = row[4];
        br.rate_a = row[5] / base;
        br.rate_b = row[6] / base;
        br.rate_c = row[7] / base;
        br.tap = row[8] == 0.0 ? 1.0 : row[8];
        br.shift = row[9] * kDegToRad;
        br.in_service = row[10] > 0.0;
        if (row.size() >= 13) {
            br.ang_min = row[11] * kDegToRad;
            br.ang_max = row[12] * kDegToRad;
        }
        c.branches.push_back(br);
    }

    std::vector<BusId> slacks;
    for (const auto& b : c.buses) {
        if (b.kind == BusKind::Slack) slacks.push_back(b.id);
    }
    if (slacks.size() > 1) {
        std::string list;
        for (const BusId id : slacks) list += (list.empty() ? "" : ", ") + std::to_string(id);
        throw CaseError(CaseError::Code::MultipleSlack, "multiple slack buses: " + list);
    }

    // Voltage-controlled buses take the setpoint of their first in-service
    // generator; a PV bus without one is treated as PQ.
    for (auto& b : c.buses) {
        if (b.kind != BusKind::PV && b.kind != BusKind::Slack) continue;
        const auto g = std::find_if(c.generators.begin(), c.generators.end(),
                                    [&](const Generator& gen) { return gen.in_service && gen.bus == b.id; });
        if (g != c.generators.end()) {
            b.v_set = g->v_set;
        } else if (b.kind == BusKind::PV) {
            b.kind = BusKind::PQ;
        }
    }
    return c;
}

NetworkCase load_matpower_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CaseError(CaseError::Code::Io, "cannot open case file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    NetworkCase c = parse_matpower(ss.str());
    if (c.name.empty()) {
        const auto slash = path.find_last_of('/');
        std::string stem = path.substr(slash == std::string::npos ? 0 : slash + 1);
        if (const auto dot = stem.rfind('.'); dot != std::string::npos) stem.resize(dot);
        c.name = stem;
    }
    return c;
}

std::string serialize_matpower(const NetworkCase& c) {
    constexpr double kRadToDeg = 180.0 / std::numbers::pi;
    const double base = c.base_mva;
    std::map<BusId, std::pair<double, double>> demand;
    for (const auto& l : c.loads) {
        auto& d = demand[l.bus];
        d.first += l.p_nom;
        d.second += l.q_nom;
    }

    std::string out;
    auto row = [&out](std::initializer_list<double> values) {
        out += '\t';
        bool first = true;
        for (const double v : values) {
            if (!first) out += '\t';
            first = false;
            append_number(out, v);
        }
        out += ";\n";
    };

    out += "function mpc = " + (c.name.empty() ? std::string("case") : c.name) + "\n";
    out += "mpc.version = '2';\n";
    out += "mpc.baseMVA = ";
    append_number(out, base);
    out += ";\n\n%% bus data\n";
    out += "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
    out += "mpc.bus = [\n";
    for (const auto& b : c.buses) {
        const auto it = demand.find(b.id);
        const double pd = it == demand.end() ? 0.0 : it->second.first;
        const double qd = it == demand.end() ? 0.0 : it->second.second;
        row({static_cast<double>(b.id), static_cast<double>(matpower_type(b.kind)), pd * base,
             qd * base, b.gs * base, b.bs * base, static_cast<double>(b.area), b.vm_init,
             b.va_init * kRadToDeg, b.base_kv, static_cast<double>(b.zone), b.v_max, b.v_min});
    }
    out += "];\n\n%% generator data\n";
    out += "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
    out += "mpc.gen = [\n";
    for (const auto& g : c.generators) {
        row({static_cast<double>(g.bus), g.p_set * base, g.q_set * base, g.q_max * base,
             g.q_min * base, g.v_set, g.m_base, g.in_service ? 1.0 : 0.0, g.p_max * base,
             g.p_min * base});
    }
    out += "];\n\n%% branch data\n";
    out += "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
    out += "mpc.branch = [\n";
    for (const auto& br : c.branches) {
        row({static_cast<double>(br.from), static_cast<double>(br.to), br.r, br.x, br.b,
             br.rate_a * base, br.rate_b * base, br.rate_c * base, br.tap, br.shift * kRadToDeg,
             br.in_service ? 1.0 : 0.0, br.ang_min * kRadToDeg, br.ang_max * kRadToDeg});
    }
    out += "];\n";
    return out;
}

std::vector<BusId> unreachable_from_slack(const NetworkCase& c) {
    const auto pos = c.bus_positions();
    std::vector<std::vector<std::size_t>> adj(c.buses.size());
    for (const auto& br : c.branches) {
        if (!br.in_service) continue;
        const auto f = pos.find(br.from);
        const auto t = pos.find(br.to);
        if (f == pos.end() || t == pos.end()) continue;
        if (c.buses[f->second].kind == BusKind::Isolated ||
            c.buses[t->second].kind == BusKind::Isolated) {
            continue;
        }
        adj[f->second].push_back(t->second);
        adj[t->second].push_back(f->second);
    }
    std::vector<char> seen(c.buses.size(), 0);
    std::queue<std::size_t> frontier;
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        if (c.buses[i].kind == BusKind::Slack) {
            seen[i] = 1;
            frontier.push(i);
        }
    }
    if (frontier.empty()) return {};
    while (!frontier.empty()) {
        const std::size_t i = frontier.front();
        frontier.pop();
        for (const std::size_t j : adj[i]) {
            if (!seen[j]) {
                seen[j] = 1;
                frontier.push(j);
            }
        }
    }
    std::vector<BusId> out;
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        if (!seen[i] && c.buses[i].kind != BusKind::Isolated) out.push_back(c.buses[i].id);
    }
    return out;
}

std::vector<Violation> validate(const NetworkCase& c) {
    std::vector<Violation> out;
    const auto pos = c.bus_positions();

    if (!(c.base_mva > 0.0)) out.push_back({"case", "base_mva must be positive"});
    if (pos.size() != c.buses.size()) out.push_back({"case", "duplicate bus ids"});

    std::vector<BusId> slacks;
    for (const auto& b : c.buses) {
        const std::string el = "bus " + std::to_string(b.id);
        if (b.kind == BusKind::Slack) slacks.push_back(b.id);
        if (!(b.v_min < b.v_max)) out.push_back({el, "v_min must be below v_max"});
        if (!(b.v_set > 0.0)) out.push_back({el, "v_set must be positive"});
    }
    if (slacks.empty()) {
        out.push_back({"case", "no slack bus"});
    } else if (slacks.size() > 1) {
        std::string el = "buses";
        for (const BusId id : slacks) el += " " + std::to_string(id);
        out.push_back({el, "more than one slack bus"});
    }

    for (std::size_t i = 0; i < c.loads.size(); ++i) {
        const auto& l = c.loads[i];
        if (!pos.contains(l.bus)) {
            out.push_back({"load " + std::to_string(i), "unknown bus " + std::to_string(l.bus)});
        }
    }

    for (std::size_t i = 0; i < c.generators.size(); ++i) {
        const auto& g = c.generators[i];
        const std::string el = "generator " + std::to_string(i) + " (bus " + std::to_string(g.bus) + ")";
        const auto it = pos.find(g.bus);
        if (it == pos.end()) {
            out.push_back({el, "unknown bus"});
            continue;
        }
        if (g.q_min > g.q_max) out.push_back({el, "q_min exceeds q_max"});
        const BusKind k = c.buses[it->second].kind;
        if (g.in_service && k != BusKind::PV && k != BusKind::Slack) {
            out.push_back({el, "in-service generator on a bus that is neither PV nor slack"});
        }
    }

    for (std::size_t i = 0; i < c.branches.size(); ++i) {
        const auto& br = c.branches[i];
        const std::string el = "branch " + std::to_string(i) + " (" + std::to_string(br.from) + "-" +
                               std::to_string(br.to) + ")";
        if (!pos.contains(br.from) || !pos.contains(br.to)) {
            out.push_back({el, "unknown end bus"});
            continue;
        }
        if (br.in_service && br.r == 0.0 && br.x == 0.0) {
            out.push_back({el, "zero series impedance"});
        }
        if (!(br.tap > 0.0)) out.push_back({el, "tap ratio must be positive"});
    }

    if (slacks.size() == 1) {
        const auto islanded = unreachable_from_slack(c);
        if (!islanded.empty()) {
            std::string el = "buses";
            for (std::size_t i = 0; i < islanded.size() && i < 20; ++i) {
                el += " " + std::to_string(islanded[i]);
            }
            if (islanded.size() > 20) el += " ...";
            out.push_back({el, std::to_string(islanded.size()) +
                                   " bus(es) not connected to the slack bus"});
        }
    }
    return out;
}

NetworkCase apply_outage(const NetworkCase& c, const Outage& outage) {
    NetworkCase out = c;
    if (const auto* go = std::get_if<GeneratorOutage>(&outage)) {
        bool any = false;
        bool any_in_service = false;
        for (auto& g : out.generators) {
            if (g.bus != go->bus) continue;
            any = true;
            if (g.in_service) {
                any_in_service = true;
                g.in_service = false;
            }
        }
        if (!any) {
            throw CaseError(CaseError::Code::UnknownElement,
                            "no generator at bus " + std::to_string(go->bus));
        }
        if (!any_in_service) {
            throw CaseError(CaseError::Code::AlreadyOutOfService,
                            "generator at bus " + std::to_string(go->bus) + " already out of service");
        }
        const auto p = out.find_bus(go->bus);
        if (!p) {
            throw CaseError(CaseError::Code::UnknownElement, "unknown bus " + std::to_string(go->bus));
        }
        Bus& bus = out.buses[*p];
        if (bus.kind == BusKind::PV) {
            bus.kind = BusKind::PQ;
        } else if (bus.kind == BusKind::Slack) {
            reassign_slack(out, bus.id);
        }
        return out;
    }

    const auto& bo = std::get<BranchOutage>(outage);
    auto locate = [&](BusId f, BusId t) -> std::optional<std::size_t> {
        int seen = 0;
        for (std::size_t i = 0; i < out.branches.size(); ++i) {
            if (out.branches[i].from == f && out.branches[i].to == t) {
                if (seen++ == bo.ordinal) return i;
            }
        }
        return std::nullopt;
    };
    auto idx = locate(bo.from, bo.to);
    if (!idx) idx = locate(bo.to, bo.from);
    if (!idx) {
        throw CaseError(CaseError::Code::UnknownElement, "unknown branch " + outage_label(outage));
    }
    Branch& br = out.branches[*idx];
    if (!br.in_service) {
        throw CaseError(CaseError::Code::AlreadyOutOfService,
                        "branch " + outage_label(outage) + " already out of service");
    }
    const auto before = unreachable_from_slack(c);
    br.in_service = false;
    const auto after = unreachable_from_slack(out);
    if (after.size() > before.size()) {
        std::string list;
        for (const BusId id : after) {
            if (std::find(before.begin(), before.end(), id) == before.end()) {
                list += (list.empty() ? "" : " ") + std::to_string(id);
            }
        }
        throw CaseError(CaseError::Code::IslandSplit,
                        "outage of " + outage_label(outage) + " islands bus(es) " + list);
    }
    return out;
}

}  // namespace splitflow
