#include "dimer/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dimer/errors.hpp"
#include "dimer/liouville.hpp"
#include "dimer/metrics.hpp"

namespace dimer::cli {

namespace {

constexpr double kTraceContract = 1e-8;
constexpr double kHermiticityContract = 1e-9;
constexpr double kPositivityContract = -1e-7;
constexpr double kResidualContract = 1e-8;

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return "";
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool parse_number(const std::string& text, double& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc() && res.ptr == end;
}

struct Field {
    int line;
    std::string key;
    std::string value;

    double number() const {
        double v = 0.0;
        if (!parse_number(value, v) || !std::isfinite(v)) {
            throw ParseError(line, "key '" + key + "' expects a finite number, got '" + value + "'");
        }
        return v;
    }

    double rate() const {
        const double v = number();
        if (v < 0.0) {
            throw ParseError(line, "key '" + key + "' must be non-negative, got " + value);
        }
        return v;
    }

    double positive() const {
        const double v = number();
        if (!(v > 0.0)) {
            throw ParseError(line, "key '" + key + "' must be positive, got " + value);
        }
        return v;
    }

    long integer() const {
        long v = 0;
        const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
        if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
            throw ParseError(line, "key '" + key + "' expects an integer, got '" + value + "'");
        }
        return v;
    }

    bool boolean() const {
        if (value == "true" || value == "yes" || value == "1") {
            return true;
        }
        if (value == "false" || value == "no" || value == "0") {
            return false;
        }
        throw ParseError(line, "key '" + key + "' expects true or false, got '" + value + "'");
    }

    std::vector<std::string> words() const {
        std::string flat = value;
        std::replace(flat.begin(), flat.end(), ',', ' ');
        std::istringstream is(flat);
        std::vector<std::string> out;
        for (std::string w; is >> w;) {
            out.push_back(w);
        }
        return out;
    }

    std::vector<double> numbers() const {
        std::vector<double> out;
        for (const auto& w : words()) {
            Field item{line, key, w};
            out.push_back(item.number());
        }
        return out;
    }

    std::vector<double> rates() const {
        auto out = numbers();
        for (double v : out) {
            if (v < 0.0) {
                throw ParseError(line, "key '" + key + "' must be non-negative");
            }
        }
        return out;
    }
};

using Handler = std::function<void(RunConfig&, const Field&)>;

const std::map<std::string, std::map<std::string, Handler>>& handlers() {
    static const std::map<std::string, std::map<std::string, Handler>> table = {
        {"bath",
         {
             {"gamma_total", [](RunConfig& c, const Field& f) { c.gamma_total = f.positive(); }},
             {"delta_gamma", [](RunConfig& c, const Field& f) { c.delta_gamma = f.number(); }},
             {"gamma_L", [](RunConfig& c, const Field& f) { c.gamma_L = f.rate(); }},
             {"gamma_R", [](RunConfig& c, const Field& f) { c.gamma_R = f.rate(); }},
             {"gamma_f", [](RunConfig& c, const Field& f) { c.gamma_f = f.rate(); }},
             {"phases", [](RunConfig& c, const Field& f) { c.phases = f.numbers(); }},
         }},
        {"drive",
         {
             {"mode",
              [](RunConfig& c, const Field& f) {
                  if (f.value == "ramp") {
                      c.drive_mode = DriveProtocol::Mode::Ramp;
                  } else if (f.value == "constant") {
                      c.drive_mode = DriveProtocol::Mode::Constant;
                  } else {
                      throw ParseError(f.line, "key 'mode' expects ramp or constant, got '" + f.value + "'");
                  }
              }},
             {"slope", [](RunConfig& c, const Field& f) { c.slope = f.positive(); }},
             {"saturation_time", [](RunConfig& c, const Field& f) { c.saturation_time = f.positive(); }},
             {"theta_k", [](RunConfig& c, const Field& f) { c.theta_k = f.positive(); }},
             {"omega", [](RunConfig& c, const Field& f) { c.omega = f.rate(); }},
             {"detunings", [](RunConfig& c, const Field& f) { c.detunings = f.numbers(); }},
         }},
        {"control",
         {
             {"mode",
              [](RunConfig& c, const Field& f) {
                  try {
                      c.control = control_mode_from_string(f.value);
                  } catch (const Error&) {
                      throw ParseError(f.line, "key 'mode' has unknown control mode '" + f.value + "'");
                  }
              }},
             {"target", [](RunConfig& c, const Field& f) { c.target = f.value; }},
         }},
        {"noise",
         {
             {"eta1", [](RunConfig& c, const Field& f) { c.noise.eta1 = f.rate(); }},
             {"eta2", [](RunConfig& c, const Field& f) { c.noise.eta2 = f.rate(); }},
         }},
        {"run",
         {
             {"command",
              [](RunConfig& c, const Field& f) {
                  static const std::map<std::string, Command> names = {{"evolve", Command::Evolve},
                                                                       {"steady-state", Command::SteadyState},
                                                                       {"gap", Command::Gap},
                                                                       {"qsl", Command::Qsl},
                                                                       {"reproduce", Command::Reproduce}};
                  const auto it = names.find(f.value);
                  if (it == names.end()) {
                      throw ParseError(f.line, "key 'command' has unknown value '" + f.value + "'");
                  }
                  c.command = it->second;
              }},
             {"scenario",
              [](RunConfig& c, const Field& f) {
                  try {
                      c.scenario = scenario_from_string(f.value);
                  } catch (const Error&) {
                      throw ParseError(f.line, "key 'scenario' has unknown value '" + f.value + "'");
                  }
              }},
             {"n_qubits",
              [](RunConfig& c, const Field& f) {
                  const long n = f.integer();
                  if (n < 1 || n > 12) {
                      throw ParseError(f.line, "key 'n_qubits' must lie in 1..12");
                  }
                  c.n_qubits = static_cast<int>(n);
              }},
             {"t_end", [](RunConfig& c, const Field& f) { c.t_end = f.positive(); }},
             {"dt", [](RunConfig& c, const Field& f) { c.dt = f.positive(); }},
             {"sample_every",
              [](RunConfig& c, const Field& f) {
                  const long n = f.integer();
                  if (n < 1) {
                      throw ParseError(f.line, "key 'sample_every' must be at least 1");
                  }
                  c.sample_every = static_cast<std::size_t>(n);
              }},
             {"max_step_norm", [](RunConfig& c, const Field& f) { c.max_step_norm = f.positive(); }},
             {"threads",
              [](RunConfig& c, const Field& f) {
                  const long n = f.integer();
                  if (n < 1) {
                      throw ParseError(f.line, "key 'threads' must be at least 1");
                  }
                  c.threads = static_cast<unsigned>(n);
              }},
             {"output_dir", [](RunConfig& c, const Field& f) { c.output_dir = f.value; }},
             {"plot", [](RunConfig& c, const Field& f) { c.plot = f.boolean(); }},
             {"initial",
              [](RunConfig& c, const Field& f) {
                  if (f.value != "ground" && f.value != "target") {
                      throw ParseError(f.line, "key 'initial' expects ground or target");
                  }
                  c.initial = f.value;
              }},
             {"slopes", [](RunConfig& c, const Field& f) { c.slopes = f.rates(); }},
             {"eta1_grid", [](RunConfig& c, const Field& f) { c.eta1_grid = f.rates(); }},
             {"eta2_grid", [](RunConfig& c, const Field& f) { c.eta2_grid = f.rates(); }},
             {"k_values", [](RunConfig& c, const Field& f) { c.k_values = f.rates(); }},
             {"gamma_f_values", [](RunConfig& c, const Field& f) { c.gamma_f_values = f.rates(); }},
             {"n_values",
              [](RunConfig& c, const Field& f) {
                  std::vector<int> out;
                  for (double v : f.numbers()) {
                      if (v != std::floor(v) || v < 2) {
                          throw ParseError(f.line, "key 'n_values' expects integers >= 2");
                      }
                      out.push_back(static_cast<int>(v));
                  }
                  c.n_values = out;
              }},
             {"steady_cap", [](RunConfig& c, const Field& f) { c.steady_cap = f.positive(); }},
             {"max_c_horizon", [](RunConfig& c, const Field& f) { c.max_c_horizon = f.positive(); }},
             {"include_n8_steady", [](RunConfig& c, const Field& f) { c.include_n8_steady = f.boolean(); }},
         }},
    };
    return table;
}

std::string csv_cell(const Cell& cell) {
    if (const double* v = std::get_if<double>(&cell)) {
        return format_number(*v);
    }
    const auto& s = std::get<std::string>(cell);
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string quoted = "\"";
    for (char ch : s) {
        if (ch == '"') {
            quoted += '"';
        }
        quoted += ch;
    }
    return quoted + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += ch;
        }
    }
    return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

bool is_numeric_column(const ResultTable& table, std::size_t c) {
    return std::all_of(table.rows.begin(), table.rows.end(),
                       [c](const auto& row) { return std::holds_alternative<double>(row[c]); });
}

std::string line_plot(const ResultTable& table, const std::string& x_name, const std::string& y_name) {
    const std::size_t xc = table.column(x_name);
    const std::size_t yc = table.column(y_name);
    // Series are keyed by every text column plus the sweep parameters m and k.
    std::vector<std::size_t> key_cols;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        const bool param = table.columns[c] == "m" || table.columns[c] == "k";
        if ((!is_numeric_column(table, c) || param) && c != xc && c != yc) {
            key_cols.push_back(c);
        }
    }
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& row : table.rows) {
        std::string key;
        for (std::size_t c : key_cols) {
            key += (key.empty() ? "" : " ") + table.columns[c] + "=" + csv_cell(row[c]);
        }
        if (!series.count(key)) {
            order.push_back(key);
        }
        const double x = std::get<double>(row[xc]);
        const double y = std::get<double>(row[yc]);
        if (!std::isfinite(x) || !std::isfinite(y)) {
            continue;
        }
        series[key].emplace_back(x, y);
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
    }
    if (!(x1 > x0)) {
        x1 = x0 + 1.0;
    }
    if (!(y1 > y0)) {
        y1 = y0 + 1.0;
    }
    const double w = 640, h = 400, left = 70, right = 200, top = 30, bottom = 50;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (w - left - right); };
    auto py = [&](double y) { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); };
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << left << "\" y=\"18\">" << xml_escape(table.scenario) << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0;
        const double yv = y0 + (y1 - y0) * i / 4.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << h - bottom + 16 << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
    }
    os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">" << xml_escape(x_name) << "</text>\n";
    os << "<text x=\"16\" y=\"" << (top + h - bottom) / 2 << "\" transform=\"rotate(-90 16 " << (top + h - bottom) / 2
       << ")\" text-anchor=\"middle\">" << xml_escape(y_name) << "</text>\n";
    for (std::size_t s = 0; s < order.size(); ++s) {
        const char* colour = kPalette[s % std::size(kPalette)];
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : series[order[s]]) {
            os << px(x) << ',' << py(y) << ' ';
        }
        os << "\"/>\n";
        const double ly = top + 16.0 * static_cast<double>(s);
        os << "<line x1=\"" << w - right + 10 << "\" y1=\"" << ly << "\" x2=\"" << w - right + 30 << "\" y2=\"" << ly
           << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << w - right + 34 << "\" y=\"" << ly + 4 << "\">" << xml_escape(order[s].empty() ? y_name : order[s])
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string heatmap(const ResultTable& table) {
    const std::vector<std::string> axes = {"eta1", "eta2"};
    const double cell_w = 30, cell_h = 22, left = 70, top = 40, gap = 90;
    std::ostringstream body;
    double width = left;
    double height = 0;
    for (const auto& axis : axes) {
        const auto rows = table.select("axis", axis);
        if (rows.empty()) {
            continue;
        }
        std::set<double> ms, etas;
        for (auto r : rows) {
            ms.insert(table.number(r, "m"));
            etas.insert(table.number(r, axis));
        }
        const std::vector<double> mv(ms.begin(), ms.end()), ev(etas.begin(), etas.end());
        const double x_origin = width;
        body << "<text x=\"" << x_origin << "\" y=\"" << top - 12 << "\">concurrence vs " << (axis == "eta1" ? "&#951;&#8321;" : "&#951;&#8322;")
             << " and m</text>\n";
        for (auto r : rows) {
            const auto xi = std::lower_bound(mv.begin(), mv.end(), table.number(r, "m")) - mv.begin();
            const auto yi = std::lower_bound(ev.begin(), ev.end(), table.number(r, axis)) - ev.begin();
            const double c = std::clamp(table.number(r, "concurrence"), 0.0, 1.0);
            const int shade = static_cast<int>(std::lround(255.0 * (1.0 - c)));
            body << "<rect x=\"" << x_origin + static_cast<double>(xi) * cell_w << "\" y=\""
                 << top + static_cast<double>(static_cast<long>(ev.size()) - 1 - yi) * cell_h << "\" width=\"" << cell_w
                 << "\" height=\"" << cell_h << "\" fill=\"rgb(" << shade << ',' << shade << ",255)\"><title>C="
                 << fmt(c) << "</title></rect>\n";
        }
        for (std::size_t i = 0; i < mv.size(); ++i) {
            body << "<text x=\"" << x_origin + (static_cast<double>(i) + 0.5) * cell_w << "\" y=\""
                 << top + static_cast<double>(ev.size()) * cell_h + 14 << "\" text-anchor=\"middle\" font-size=\"9\">"
                 << fmt(mv[i]) << "</text>\n";
        }
        for (std::size_t i = 0; i < ev.size(); ++i) {
            body << "<text x=\"" << x_origin - 4 << "\" y=\""
                 << top + (static_cast<double>(ev.size() - 1 - i) + 0.7) * cell_h << "\" text-anchor=\"end\" font-size=\"9\">"
                 << fmt(ev[i]) << "</text>\n";
        }
        body << "<text x=\"" << x_origin + static_cast<double>(mv.size()) * cell_w / 2 << "\" y=\""
             << top + static_cast<double>(ev.size()) * cell_h + 32 << "\" text-anchor=\"middle\">m</text>\n";
        body << "<text x=\"" << x_origin - 40 << "\" y=\"" << top + static_cast<double>(ev.size()) * cell_h / 2
             << "\" text-anchor=\"middle\">" << (axis == "eta1" ? "&#951;&#8321;" : "&#951;&#8322;") << "</text>\n";
        width = x_origin + static_cast<double>(mv.size()) * cell_w + gap;
        height = std::max(height, top + static_cast<double>(ev.size()) * cell_h + 50);
    }
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << body.str() << "</svg>\n";
    return os.str();
}

std::string bar_plot(const ResultTable& table, const std::string& y_name) {
    const std::size_t yc = table.column(y_name);
    const double bar = 24, left = 60, top = 30, plot_h = 260;
    std::ostringstream os;
    const double width = left + bar * 1.5 * static_cast<double>(table.rows.size()) + 40;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << plot_h + 160
       << "\" font-family=\"sans-serif\" font-size=\"10\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << left << "\" y=\"18\" font-size=\"12\">" << xml_escape(table.scenario + ": " + y_name) << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << width - 20 << "\" y2=\"" << top + plot_h
       << "\" stroke=\"black\"/>\n";
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        double v = std::get<double>(table.rows[r][yc]);
        if (!std::isfinite(v)) {
            v = 0.0;
        }
        v = std::clamp(v, 0.0, 1.0);
        const double x = left + bar * 1.5 * static_cast<double>(r);
        std::string label;
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            if (c != yc && (table.columns[c] == "n_qubits" || table.columns[c] == "gamma_f" || table.columns[c] == "scheme")) {
                label += (label.empty() ? "" : " ") + csv_cell(table.rows[r][c]);
            }
        }
        os << "<rect x=\"" << x << "\" y=\"" << top + plot_h * (1.0 - v) << "\" width=\"" << bar << "\" height=\""
           << plot_h * v << "\" fill=\"" << kPalette[r % 3] << "\"><title>" << fmt(v) << "</title></rect>\n";
        os << "<text transform=\"translate(" << x + bar / 2 << ',' << top + plot_h + 8 << ") rotate(60)\">"
           << xml_escape(label) << "</text>\n";
    }
    os << "<text x=\"" << left - 6 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">1</text>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << top + plot_h << "\" text-anchor=\"end\">0</text>\n";
    os << "</svg>\n";
    return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    }
    out << content;
    out.close();
    if (!out) {
        throw Error(ErrorKind::Io, "failed writing " + path.string());
    }
}

bool invariants_ok(const InvariantLedger& ledger) {
    return ledger.max_trace_drift < kTraceContract && ledger.max_hermiticity_error < kHermiticityContract &&
           ledger.min_eigenvalue >= kPositivityContract;
}

} // namespace

const char* to_string(Command command) {
    switch (command) {
    case Command::Evolve: return "evolve";
    case Command::SteadyState: return "steady-state";
    case Command::Gap: return "gap";
    case Command::Qsl: return "qsl";
    case Command::Reproduce: return "reproduce";
    }
    return "unknown";
}

RunConfig parse_config(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    bool have_command = false;
    bool have_mode = false;
    bool have_slope = false;
    std::set<std::string> seen;
    int gamma_line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string content = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (content.empty()) {
            continue;
        }
        if (content.front() == '[') {
            if (content.back() != ']') {
                throw ParseError(line, "unterminated section header '" + content + "'");
            }
            section = trim(content.substr(1, content.size() - 2));
            if (!handlers().count(section)) {
                throw ParseError(line, "unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string::npos) {
            throw ParseError(line, "expected key = value, got '" + content + "'");
        }
        if (section.empty()) {
            throw ParseError(line, "key outside of any section");
        }
        const Field field{line, trim(content.substr(0, eq)), trim(content.substr(eq + 1))};
        if (field.value.empty()) {
            throw ParseError(line, "key '" + field.key + "' has no value");
        }
        const auto& keys = handlers().at(section);
        const auto it = keys.find(field.key);
        if (it == keys.end()) {
            throw ParseError(line, "unknown key '" + field.key + "' in [" + section + "]");
        }
        if (!seen.insert(section + "." + field.key).second) {
            throw ParseError(line, "duplicate key '" + field.key + "' in [" + section + "]");
        }
        it->second(config, field);
        have_command |= section == "run" && field.key == "command";
        have_mode |= section == "drive" && field.key == "mode";
        have_slope |= section == "drive" && field.key == "slope";
        if (section == "bath" && (field.key == "gamma_L" || field.key == "gamma_R")) {
            gamma_line = line;
        }
    }
    if (!have_command) {
        throw ParseError(line + 1, "missing required key 'command' in [run]");
    }
    if (config.command == Command::Reproduce && !config.scenario) {
        throw ParseError(line + 1, "command = reproduce needs key 'scenario' in [run]");
    }
    if (config.gamma_L.has_value() != config.gamma_R.has_value()) {
        throw ParseError(gamma_line, "gamma_L and gamma_R must be given together");
    }
    if (!have_mode && config.omega && !have_slope) {
        config.drive_mode = DriveProtocol::Mode::Constant;
    }
    if (config.drive_mode == DriveProtocol::Mode::Constant && !config.omega) {
        throw ParseError(line + 1, "constant drive needs key 'omega' in [drive]");
    }
    try {
        if (config.command != Command::Reproduce) {
            config.bath().validate(config.n_qubits);
            config.pairing().validate(config.n_qubits);
            config.protocol().validate();
            config.noise.validate();
            if (!config.detunings.empty() && config.detunings.size() != static_cast<std::size_t>(config.n_qubits)) {
                throw Error(ErrorKind::Shape, "detunings need one entry per qubit");
            }
        }
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(line, e.what());
    }
    return config;
}

BathConfig RunConfig::bath() const {
    BathConfig b = gamma_L ? BathConfig{*gamma_L, *gamma_R, {}, gamma_f}
                           : BathConfig::from_chirality(gamma_total, delta_gamma, gamma_f);
    b.phases = phases;
    return b;
}

PairingSpec RunConfig::pairing() const {
    if (target == "dimers") {
        return PairingSpec::adjacent_dimers(n_qubits);
    }
    if (target == "all-pairings") {
        return PairingSpec::all_pairings();
    }
    std::vector<std::pair<int, int>> pairs;
    std::istringstream is(target);
    for (std::string token; is >> token;) {
        const auto dash = token.find('-');
        int i = 0, j = 0;
        if (dash == std::string::npos ||
            std::from_chars(token.data(), token.data() + dash, i).ec != std::errc() ||
            std::from_chars(token.data() + dash + 1, token.data() + token.size(), j).ec != std::errc()) {
            throw Error(ErrorKind::Domain, "target pair '" + token + "' is not of the form i-j");
        }
        pairs.emplace_back(i, j);
    }
    return PairingSpec::disjoint(pairs);
}

DriveProtocol RunConfig::protocol() const {
    if (drive_mode == DriveProtocol::Mode::Constant) {
        return DriveProtocol::constant(omega.value_or(0.0), theta_k);
    }
    return DriveProtocol::ramp(slope, saturation_time, theta_k);
}

double RunConfig::frozen_omega() const {
    if (omega) {
        return *omega;
    }
    return drive_mode == DriveProtocol::Mode::Ramp ? slope * saturation_time : 0.0;
}

SystemModel RunConfig::build_model() const {
    const TargetState tgt = target_state(pairing(), n_qubits);
    DetuningPattern det = detunings.empty() ? DetuningPattern::zeros(n_qubits) : DetuningPattern{detunings};
    return SystemModel::assemble(bath(), det, protocol(), control, tgt, noise, n_qubits);
}

ScenarioConfig RunConfig::scenario_config() const {
    if (!scenario) {
        throw Error(ErrorKind::Domain, "no scenario selected");
    }
    ScenarioConfig c = ScenarioConfig::preset(*scenario);
    if (t_end) c.t_end = *t_end;
    if (dt) c.dt = *dt;
    if (sample_every) c.sample_every = *sample_every;
    if (max_step_norm) c.max_step_norm = *max_step_norm;
    c.threads = threads;
    if (slopes) c.slopes = *slopes;
    if (eta1_grid) c.eta1_grid = *eta1_grid;
    if (eta2_grid) c.eta2_grid = *eta2_grid;
    if (k_values) c.k_values = *k_values;
    if (gamma_f_values) c.gamma_f_values = *gamma_f_values;
    if (n_values) c.n_values = *n_values;
    if (steady_cap) c.steady_cap = *steady_cap;
    if (max_c_horizon) c.max_c_horizon = *max_c_horizon;
    c.include_n8_steady = include_n8_steady;
    return c;
}

Outcome execute(const RunConfig& config) {
    Outcome out;
    auto& table = out.table;
    if (config.command == Command::Reproduce) {
        const auto result = run_scenario(config.scenario_config());
        table = result.table;
        table.metadata["max_trace_drift"] = format_number(result.invariants.max_trace_drift);
        table.metadata["max_hermiticity_error"] = format_number(result.invariants.max_hermiticity_error);
        table.metadata["min_eigenvalue"] = format_number(result.invariants.min_eigenvalue);
        out.contracts_met = invariants_ok(result.invariants);
        if (!out.contracts_met) {
            out.notes.push_back("trajectory invariants outside tolerance");
        }
        return out;
    }

    const SystemModel model = config.build_model();
    const auto& target = model.target();
    table.metadata["engine_version"] = kEngineVersion;
    table.metadata["command"] = to_string(config.command);
    table.metadata["n_qubits"] = std::to_string(config.n_qubits);
    table.metadata["control"] = dimer::to_string(config.control);

    switch (config.command) {
    case Command::Evolve: {
        table.scenario = "evolve";
        const DensityMatrix rho0 =
            pure_state(config.initial == "target" ? StateVector(target.vector) : ops::ground_state(config.n_qubits));
        EvolveOptions options;
        if (config.max_step_norm) {
            options.max_step_norm = *config.max_step_norm;
        }
        options.storage = StoragePolicy::MetricsOnly;
        const Trajectory traj = evolve(model, rho0, config.t_end.value_or(3.0), config.dt.value_or(0.01),
                                       config.sample_every.value_or(1), options);
        table.columns = {"t", "mean_concurrence", "fidelity", "purity"};
        if (target.pairing.kind == PairingSpec::Kind::DisjointPairs) {
            for (auto [i, j] : target.pairing.pairs) {
                table.columns.push_back("concurrence_" + std::to_string(i) + "_" + std::to_string(j));
            }
        }
        for (const auto& s : traj.samples) {
            std::vector<Cell> row{s.t, s.mean_concurrence(), s.fidelity_to_target, s.global_purity};
            for (double c : s.concurrence_per_pair) {
                row.emplace_back(c);
            }
            table.add_row(std::move(row));
        }
        InvariantLedger ledger;
        ledger.absorb(traj);
        table.metadata["max_trace_drift"] = format_number(ledger.max_trace_drift);
        table.metadata["max_hermiticity_error"] = format_number(ledger.max_hermiticity_error);
        table.metadata["min_eigenvalue"] = format_number(ledger.min_eigenvalue);
        out.contracts_met = invariants_ok(ledger);
        break;
    }
    case Command::SteadyState: {
        table.scenario = "steady_state";
        const double omega = config.frozen_omega();
        table.columns = {"omega", "null_dim", "residual", "clipped", "fidelity", "mean_concurrence", "mean_root_fidelity",
                         "purity", "method"};
        SteadyStateResult ss;
        std::string method = "nullspace";
        if (config.n_qubits <= kMaxDenseLiouvillianQubits) {
            ss = steady_state(build_liouvillian(model, omega), false);
        } else {
            const SystemModel frozen = model.frozen(omega);
            const auto ev = steady_state_by_evolution(frozen, pure_state(ops::ground_state(config.n_qubits)),
                                                      config.t_end.value_or(200.0), 0.5);
            ss = ev.result;
            method = ev.converged ? "evolution" : "evolution_capped";
            out.contracts_met = ev.converged;
        }
        const auto sample = sample_metrics(0.0, ss.rho_ss, target);
        double root = 0.0;
        for (double f : sample.singlet_fidelity_per_pair) {
            root += std::sqrt(std::max(f, 0.0));
        }
        if (!sample.singlet_fidelity_per_pair.empty()) {
            root /= static_cast<double>(sample.singlet_fidelity_per_pair.size());
        }
        table.add_row({omega, static_cast<double>(ss.null_dim), ss.residual, ss.clipped, sample.fidelity_to_target,
                       sample.mean_concurrence(), root, sample.global_purity, method});
        if (config.n_qubits == 2) {
            const StateVector s = analytic_n2_steady_state(model.bath().chirality(), omega);
            table.metadata["closed_form_fidelity"] = format_number(fidelity_to_pure(ss.rho_ss, s));
        }
        if (method == "nullspace") {
            out.contracts_met = ss.null_dim == 1 && ss.residual < kResidualContract;
            if (ss.null_dim > 1) {
                out.notes.push_back("steady state is degenerate (nullspace dimension " + std::to_string(ss.null_dim) + ")");
            }
        }
        break;
    }
    case Command::Gap: {
        table.scenario = "gap";
        const double omega = config.frozen_omega();
        const auto gap = liouvillian_gap(build_liouvillian(model, omega));
        table.columns = {"omega", "gap", "zero_modes", "max_real_part", "relaxation_time"};
        table.add_row({omega, gap.gap, static_cast<double>(gap.zero_modes), gap.max_real_part, 1.0 / gap.gap});
        out.contracts_met = gap.max_real_part <= 1e-10;
        break;
    }
    case Command::Qsl: {
        table.scenario = "qsl";
        table.columns = {"state", "activity", "bound"};
        const auto bath = model.bath();
        const auto t = qsl_activity(target.vector, bath);
        table.add_row({std::string("target"), t.activity, t.bound});
        const double omega = config.frozen_omega();
        if (config.n_qubits == 2 && omega > 0.0) {
            const auto s = qsl_activity(analytic_n2_steady_state(bath.chirality(), omega), bath);
            table.add_row({std::string("closed_form_steady_state"), s.activity, s.bound});
        }
        break;
    }
    case Command::Reproduce: break;
    }
    return out;
}

std::string to_csv(const ResultTable& table) {
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        out += (c ? "," : "") + csv_cell(table.columns[c]);
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += (c ? "," : "") + csv_cell(row[c]);
        }
        out += '\n';
    }
    return out;
}

ResultTable parse_csv(const std::string& text) {
    ResultTable table;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorKind::Parse, "empty CSV");
    }
    table.columns = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<Cell> row;
        for (const auto& cell : split_csv_line(line)) {
            double v = 0.0;
            if (parse_number(cell, v)) {
                row.emplace_back(v);
            } else {
                row.emplace_back(cell);
            }
        }
        table.add_row(std::move(row));
    }
    return table;
}

std::string to_svg(const ResultTable& table) {
    const auto has = [&](const std::string& name) {
        return std::find(table.columns.begin(), table.columns.end(), name) != table.columns.end();
    };
    if (table.rows.empty()) {
        return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"200\" height=\"40\"><text x=\"10\" y=\"25\">no data</text></svg>\n";
    }
    if (has("axis") && has("m") && has("concurrence")) {
        return heatmap(table);
    }
    if (has("t")) {
        for (const char* y : {"concurrence_12", "concurrence", "mean_concurrence", "fidelity"}) {
            if (has(y)) {
                return line_plot(table, "t", y);
            }
        }
    }
    for (const char* y : {"max_concurrence", "fidelity", "gap", "activity"}) {
        if (has(y)) {
            return bar_plot(table, y);
        }
    }
    return bar_plot(table, table.columns.front());
}

std::string metadata_json(const ResultTable& table, const RunConfig* config) {
    nlohmann::ordered_json j;
    j["scenario"] = table.scenario;
    j["engine_version"] = kEngineVersion;
    j["columns"] = table.columns;
    j["rows"] = table.rows.size();
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : table.metadata) {
        params[k] = v;
    }
    j["parameters"] = params;
    if (config) {
        nlohmann::ordered_json c;
        c["command"] = to_string(config->command);
        c["n_qubits"] = config->n_qubits;
        c["gamma_L"] = config->bath().gamma_L;
        c["gamma_R"] = config->bath().gamma_R;
        c["gamma_f"] = config->gamma_f;
        c["drive_mode"] = config->drive_mode == DriveProtocol::Mode::Ramp ? "ramp" : "constant";
        c["slope"] = config->slope;
        c["saturation_time"] = config->saturation_time;
        c["theta_k"] = config->theta_k;
        if (config->omega) c["omega"] = *config->omega;
        c["detunings"] = config->detunings;
        c["control"] = dimer::to_string(config->control);
        c["target"] = config->target;
        c["eta1"] = config->noise.eta1;
        c["eta2"] = config->noise.eta2;
        c["threads"] = config->threads;
        j["config"] = c;
    }
    return j.dump(2) + "\n";
}

std::vector<std::filesystem::path> emit_outputs(const ResultTable& table, const std::filesystem::path& dir, bool plot,
                                                const RunConfig* config) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    }
    const std::string stem = table.scenario.empty() ? "result" : table.scenario;
    std::vector<std::filesystem::path> written;
    written.push_back(dir / (stem + ".csv"));
    write_file(written.back(), to_csv(table));
    written.push_back(dir / (stem + ".json"));
    write_file(written.back(), metadata_json(table, config));
    if (plot) {
        written.push_back(dir / (stem + ".svg"));
        write_file(written.back(), to_svg(table));
    }
    return written;
}

std::string help_text() {
    return R"(Config file: key = value lines in sections. Rates in units of Gamma, times in 1/Gamma.

[bath]     gamma_total (1), delta_gamma (0) | gamma_L + gamma_R, gamma_f (0), phases (all 0)
[drive]    mode ramp|constant (ramp; constant when only omega is given), slope m (25),
           saturation_time t_f (1), theta_k (10), omega, detunings (one per qubit, 0)
[control]  mode exact|approximate|local-pauli|counterdiabatic|none (local-pauli),
           target dimers|all-pairings|"1-2 3-4" (dimers)
[noise]    eta1 (0), eta2 (0)
[run]      command evolve|steady-state|gap|qsl|reproduce (required), scenario (for reproduce),
           n_qubits (2), t_end (evolve 3; steady-state beyond 6 qubits 200; else preset),
           dt (0.01), sample_every (1), max_step_norm (0.025), threads (1), output_dir (out),
           plot (false), initial ground|target (ground)
           reproduce overrides: slopes, eta1_grid, eta2_grid, k_values, gamma_f_values, n_values,
           steady_cap, max_c_horizon, include_n8_steady

CSV schemas:
  evolve                  t, mean_concurrence, fidelity, purity, concurrence_i_j per pair
  steady_state            omega, null_dim, residual, clipped, fidelity, mean_concurrence,
                          mean_root_fidelity, purity, method
  gap                     omega, gap, zero_modes, max_real_part, relaxation_time
  qsl                     state, activity, bound
  fig2_scheme_comparison  t, scheme, concurrence_12, purity_12
  fig3_robustness         axis, eta1, eta2, m, concurrence, log_one_minus_c, t_steady, residual, converged
  tqd_comparison          t, scheme, m, concurrence, fidelity
  hextra_chirality        t, study, mode, m, k, concurrence, purity, fidelity
  hextra_drive_neglect    (same as hextra_chirality)
  spontaneous_emission    n_qubits, gamma_f, scheme, steady_concurrence, steady_fidelity, steady_residual,
                          steady_method, max_concurrence, t_max_concurrence
  detuning_patterns       t, pattern, scheme, mean_concurrence, purity
  multimer_n6             t, fidelity, purity

Exit status: 0 when every residual and trajectory tolerance was met, 2 when a contract failed,
1 on errors.
)";
}

} // namespace dimer::cli
