#include "rheston/bench.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "rheston/hybrid_mc.hpp"
#include "rheston/implied_vol.hpp"

namespace rheston {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

template <class T>
T parse_number(const std::string& text, const std::string& where) {
    const std::string t = trim(text);
    T value{};
    const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
        throw ConfigError(where + ": cannot parse '" + t + "' as a number");
    }
    return value;
}

bool parse_bool(const std::string& text, const std::string& where) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw ConfigError(where + ": expected true/false, got '" + t + "'");
}

std::vector<double> parse_list(const std::string& text, const std::string& where) {
    std::vector<double> out;
    for (const auto& item : split(text, ',')) out.push_back(parse_number<double>(item, where));
    return out;
}

std::vector<SmileConfig> parse_smile_configs(const std::string& text, const std::string& where) {
    std::vector<SmileConfig> out;
    for (const auto& item : split(text, ';')) {
        const auto f = split(item, ':');
        if (f.size() != 5) throw ConfigError(where + ": expected T:id:m:neurons:layers, got '" + item + "'");
        SmileConfig c;
        c.maturity = parse_number<double>(f[0], where);
        c.id = parse_number<std::size_t>(f[1], where);
        c.m = parse_number<std::size_t>(f[2], where);
        c.neurons = parse_number<std::size_t>(f[3], where);
        c.layers = parse_number<std::size_t>(f[4], where);
        out.push_back(c);
    }
    return out;
}

void ensure_dir(const std::filesystem::path& dir) { std::filesystem::create_directories(dir); }

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return os;
}

void write_row(std::ostream& os, const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << format_double(values[i]);
    os << '\n';
}

std::string tag(double T) { return "T" + format_double(T); }

void write_strike_file(const std::filesystem::path& path, const std::vector<double>& logm,
                       const std::vector<std::vector<double>>& rows) {
    auto os = open_out(path);
    os << strike_header(logm) << '\n';
    for (const auto& r : rows) write_row(os, r);
}

std::vector<double> reference_prices(const RunConfig& cfg, const ModelParams& params, double T, std::size_t steps,
                                     double* seconds) {
    const auto start = Clock::now();
    std::vector<double> prices = lewis_price(params, T, cfg.strikes(), steps, cfg.quadrature);
    if (cfg.clip_at_zero) {
        for (double& p : prices) p = std::max(p, 0.0);
    }
    if (seconds) *seconds = seconds_since(start);
    return prices;
}

}  // namespace

std::vector<double> RunConfig::log_moneyness() const {
    std::vector<double> out;
    if (strike_count == 1) return {strike_lo};
    for (std::size_t i = 0; i < strike_count; ++i) {
        out.push_back(strike_lo + (strike_hi - strike_lo) * static_cast<double>(i) / static_cast<double>(strike_count - 1));
    }
    return out;
}

std::vector<double> RunConfig::strikes() const {
    std::vector<double> out;
    for (const double k : log_moneyness()) out.push_back(params.s0 * std::exp(k));
    return out;
}

void RunConfig::validate() const {
    try {
        params.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[model]: ") + e.what());
    }
    if (strike_count < 1) throw ConfigError("strikes.count: must be at least 1");
    if (!(strike_hi >= strike_lo)) throw ConfigError("strikes.hi: must not be below strikes.lo");
    for (const double T : maturities) {
        if (!(T > 0.0)) throw ConfigError("grid.maturities: maturities must be positive");
    }
    if (riccati_steps < 1) throw ConfigError("riccati.steps: must be at least 1");
    if (mc_paths < 1) throw ConfigError("mc.paths: must be at least 1");
    if (mc_steps < 1) throw ConfigError("mc.steps: must be at least 1");
    if (bsde.m < 1 || bsde.m > bsde.fine_steps) throw ConfigError("bsde.m: must lie in [1, fine_steps]");
    if (bsde.batch_size < 2) throw ConfigError("bsde.batch_size: must be at least 2");
    if (bsde.pool_paths < bsde.batch_size) throw ConfigError("bsde.pool_paths: must be at least batch_size");
}

RunConfig parse_config(std::istream& is, const std::string& source_name) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source_name + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    RunConfig cfg;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto num = [](auto& field) {
        return Setter([&field](const std::string& v, const std::string& w) {
            field = parse_number<std::remove_reference_t<decltype(field)>>(v, w);
        });
    };
    auto flag = [](bool& field) {
        return Setter([&field](const std::string& v, const std::string& w) { field = parse_bool(v, w); });
    };
    const std::map<std::string, Setter> setters{
        {"model.kappa", num(cfg.params.kappa)},
        {"model.theta", num(cfg.params.theta)},
        {"model.nu", num(cfg.params.nu)},
        {"model.alpha", num(cfg.params.alpha)},
        {"model.rho", num(cfg.params.rho)},
        {"model.v0", num(cfg.params.v0)},
        {"model.s0", num(cfg.params.s0)},
        {"model.r", num(cfg.params.r)},
        {"grid.maturities", [&](const std::string& v, const std::string& w) { cfg.maturities = parse_list(v, w); }},
        {"strikes.count", num(cfg.strike_count)},
        {"strikes.lo", num(cfg.strike_lo)},
        {"strikes.hi", num(cfg.strike_hi)},
        {"riccati.steps", num(cfg.riccati_steps)},
        {"riccati.u_max", num(cfg.quadrature.u_max)},
        {"riccati.panels", num(cfg.quadrature.panels)},
        {"riccati.nodes", num(cfg.quadrature.nodes)},
        {"riccati.max_panels", num(cfg.quadrature.max_panels)},
        {"riccati.tol", num(cfg.quadrature.tol)},
        {"riccati.tail_cutoff", num(cfg.quadrature.tail_cutoff)},
        {"mc.paths", num(cfg.mc_paths)},
        {"mc.steps", num(cfg.mc_steps)},
        {"mc.seed", num(cfg.seed)},
        {"bsde.m", num(cfg.bsde.m)},
        {"bsde.layers", num(cfg.bsde.layers)},
        {"bsde.neurons", num(cfg.bsde.neurons)},
        {"bsde.p", num(cfg.bsde.p)},
        {"bsde.learning_rate", num(cfg.bsde.learning_rate)},
        {"bsde.iterations", num(cfg.bsde.iterations)},
        {"bsde.batch_size", num(cfg.bsde.batch_size)},
        {"bsde.adam_fraction", num(cfg.bsde.adam_fraction)},
        {"bsde.pool_paths", num(cfg.bsde.pool_paths)},
        {"bsde.fine_steps", num(cfg.bsde.fine_steps)},
        {"bsde.resample", flag(cfg.bsde.resample)},
        {"bsde.forward_mode", flag(cfg.bsde.forward_mode)},
        {"bsde.eval_paths", num(cfg.bsde.eval_paths)},
        {"bsde.log_every", num(cfg.bsde.log_every)},
        {"smile.configs",
         [&](const std::string& v, const std::string& w) { cfg.smile_configs = parse_smile_configs(v, w); }},
        {"smile.riccati_steps", num(cfg.smile_riccati_steps)},
        {"output.dir", [&](const std::string& v, const std::string&) { cfg.out_dir = trim(v); }},
        {"output.clip_at_zero", flag(cfg.clip_at_zero)},
    };
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError(source_name + ": key '" + section + "' outside of a section");
        for (const auto& [key, value] : body) {
            const std::string name = section + "." + key;
            const auto it = setters.find(name);
            if (it == setters.end()) throw ConfigError(source_name + ": unknown key " + name);
            it->second(value.data(), source_name + ": " + name);
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    return parse_config(is, path.string());
}

MethodErrors compare(const std::vector<double>& method, const std::vector<double>& reference) {
    if (method.size() != reference.size()) throw std::invalid_argument("compare: size mismatch");
    MethodErrors e;
    if (method.empty()) return e;
    for (std::size_t i = 0; i < method.size(); ++i) {
        const double d = method[i] - reference[i];
        e.avg += d;
        e.max = std::max(e.max, std::abs(d));
    }
    e.avg /= static_cast<double>(method.size());
    return e;
}

std::string strike_header(const std::vector<double>& log_moneyness) {
    std::string out;
    for (std::size_t i = 0; i < log_moneyness.size(); ++i) {
        char buf[32];
        const double x = std::abs(log_moneyness[i]) < 5e-3 ? 0.0 : log_moneyness[i];
        const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, 2);
        out += (i ? ",k_" : "k_") + std::string(buf, res.ptr);
    }
    return out;
}

std::vector<std::vector<double>> run_riccati(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir);
    const auto logm = cfg.log_moneyness();
    std::vector<std::vector<double>> table;
    auto combined = open_out(cfg.out_dir / "riccati.csv");
    auto timings = open_out(cfg.out_dir / "timings.csv");
    combined << "T," << strike_header(logm) << '\n';
    timings << "T,riccati_seconds\n";
    for (const double T : cfg.maturities) {
        double secs = 0.0;
        table.push_back(reference_prices(cfg, cfg.params, T, cfg.riccati_steps, &secs));
        write_strike_file(cfg.out_dir / ("riccati_" + tag(T) + ".csv"), logm, {table.back()});
        combined << format_double(T) << ',';
        write_row(combined, table.back());
        timings << format_double(T) << ',' << format_double(secs) << '\n';
    }
    return table;
}

ComparisonReport run_mc(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir);
    ComparisonReport rep;
    rep.method = "mc";
    rep.log_moneyness = cfg.log_moneyness();
    const auto strikes = cfg.strikes();
    auto report = open_out(cfg.out_dir / "mc_report.csv");
    auto timings = open_out(cfg.out_dir / "timings.csv");
    report << "T,paths,steps,avg_error,max_error\n";
    timings << "T,mc_seconds,riccati_seconds\n";
    for (const double T : cfg.maturities) {
        MaturityReport row;
        row.T = T;
        row.reference = reference_prices(cfg, cfg.params, T, cfg.riccati_steps, &row.reference_seconds);
        const auto start = Clock::now();
        const auto est = mc_price(simulate(cfg.params, GridSpec{cfg.mc_steps, T}, cfg.mc_paths, cfg.seed), strikes);
        row.method_seconds = seconds_since(start);
        for (const auto& e : est) {
            row.prices.push_back(e.price);
            row.std_errors.push_back(e.std_error);
        }
        row.errors = compare(row.prices, row.reference);
        write_strike_file(cfg.out_dir / ("mc_" + tag(T) + ".csv"), rep.log_moneyness, {row.prices});
        write_strike_file(cfg.out_dir / ("mc_se_" + tag(T) + ".csv"), rep.log_moneyness, {row.std_errors});
        report << format_double(T) << ',' << cfg.mc_paths << ',' << cfg.mc_steps << ','
               << format_double(row.errors.avg) << ',' << format_double(row.errors.max) << '\n';
        timings << format_double(T) << ',' << format_double(row.method_seconds) << ','
                << format_double(row.reference_seconds) << '\n';
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

ComparisonReport run_bsde(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir);
    ComparisonReport rep;
    rep.method = "bsde";
    rep.log_moneyness = cfg.log_moneyness();
    const auto strikes = cfg.strikes();
    auto report = open_out(cfg.out_dir / "bsde_report.csv");
    auto timings = open_out(cfg.out_dir / "timings.csv");
    auto log = open_out(cfg.out_dir / "bsde_train_log.jsonl");
    report << "T,m,avg_error,max_error,trained\n";
    timings << "T,build_seconds,train_seconds,price_seconds,riccati_seconds\n";
    for (const double T : cfg.maturities) {
        MaturityReport row;
        row.T = T;
        row.reference = reference_prices(cfg, cfg.params, T, cfg.riccati_steps, &row.reference_seconds);
        const TrainResult res = train(cfg.bsde, cfg.params, T, strikes, cfg.seed, &log);
        row.prices = res.prices;
        row.std_errors = res.std_errors;
        row.trained = res.trained;
        row.bsde_timings = res.timings;
        row.errors = compare(row.prices, row.reference);
        write_strike_file(cfg.out_dir / ("bsde_" + tag(T) + ".csv"), rep.log_moneyness, {row.prices});
        report << format_double(T) << ',' << cfg.bsde.m << ',' << format_double(row.errors.avg) << ','
               << format_double(row.errors.max) << ',' << (row.trained ? 1 : 0) << '\n';
        timings << format_double(T) << ',' << format_double(res.timings.build) << ','
                << format_double(res.timings.train) << ',' << format_double(res.timings.price) << ','
                << format_double(row.reference_seconds) << '\n';
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

std::vector<SmileTable> run_smile(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir);
    const auto logm = cfg.log_moneyness();
    const auto strikes = cfg.strikes();
    auto log = open_out(cfg.out_dir / "smile_train_log.jsonl");
    auto vol_or_nan = [&](double price, double strike, double T) {
        try {
            return implied_vol(price, cfg.params.s0, strike, T, cfg.params.r);
        } catch (const PriceOutOfBounds&) {
            return std::nan("");
        }
    };
    std::vector<SmileTable> out;
    for (const double T : cfg.maturities) {
        SmileTable tab;
        tab.T = T;
        tab.log_moneyness = logm;
        std::vector<double> ref;
        try {
            ref = reference_prices(cfg, cfg.params, T, cfg.smile_riccati_steps, nullptr);
        } catch (const NumericalError&) {
            ref.assign(strikes.size(), std::nan(""));
        }
        for (std::size_t j = 0; j < strikes.size(); ++j) tab.reference_vol.push_back(vol_or_nan(ref[j], strikes[j], T));
        std::vector<SmileConfig> used;
        for (const SmileConfig& sc : cfg.smile_configs) {
            if (sc.maturity != 0.0 && sc.maturity != T) continue;
            BsdeConfig bc = cfg.bsde;
            bc.m = sc.m;
            bc.neurons = sc.neurons;
            bc.layers = sc.layers;
            const TrainResult res = train(bc, cfg.params, T, strikes, cfg.seed, &log);
            tab.config_price.push_back(res.prices);
            std::vector<double> vols;
            for (std::size_t j = 0; j < strikes.size(); ++j) vols.push_back(vol_or_nan(res.prices[j], strikes[j], T));
            tab.config_vol.push_back(std::move(vols));
            used.push_back(sc);
        }
        auto os = open_out(cfg.out_dir / ("smile_" + tag(T) + ".csv"));
        os << "log_moneyness,riccati_price,riccati_vol";
        for (const auto& sc : used) os << ",cfg" << sc.id << "_price,cfg" << sc.id << "_vol";
        os << '\n';
        for (std::size_t j = 0; j < strikes.size(); ++j) {
            std::vector<double> row{logm[j], ref[j], tab.reference_vol[j]};
            for (std::size_t c = 0; c < used.size(); ++c) {
                row.push_back(tab.config_price[c][j]);
                row.push_back(tab.config_vol[c][j]);
            }
            write_row(os, row);
        }
        out.push_back(std::move(tab));
    }
    return out;
}

}  // namespace rheston
