// Operator toolkit: policy authoring, gateway serving, experiment drivers
// and blacklist administration.
//
// Exit codes: 0 success, 1 validation error, 2 runtime error.

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tbac/config.hpp"
#include "tbac/gateway.hpp"
#include "tbac/loadgen.hpp"
#include "tbac/model.hpp"
#include "tbac/monitor.hpp"
#include "tbac/policy.hpp"

namespace fs = std::filesystem;

namespace {

tbac::SoaModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tbac::ParseError("cannot open model file: " + path);
    return tbac::load_model(in);
}

tbac::Srm load_srm_file(const std::string& path, const tbac::SoaModel& model) {
    std::ifstream in(path);
    if (!in) throw tbac::ParseError("cannot open srm file: " + path);
    return tbac::parse_srm(in, model);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(tok);
    return out;
}

struct ExpOptions {
    std::string config_path;
    std::string gateway = "127.0.0.1:8080";
    std::string consumer;
    std::string key;
    std::string target;
    std::string services;
    std::uint64_t count = 10000;
    std::uint64_t seed = 1;
    std::string schedule;
    std::string sizes;
    std::string out_dir = "reports";
    std::string mode = "uar";
};

void add_exp_common(CLI::App* cmd, ExpOptions& opt) {
    cmd->add_option("--config", opt.config_path, "gateway config file")->required();
    cmd->add_option("--gateway", opt.gateway, "gateway address host:port");
    cmd->add_option("--consumer", opt.consumer)->required();
    cmd->add_option("--key", opt.key)->required();
    cmd->add_option("--target", opt.target)->required();
    cmd->add_option("--services", opt.services, "comma separated service ids");
    cmd->add_option("--seed", opt.seed);
    cmd->add_option("--out", opt.out_dir, "report output directory");
}

std::pair<std::string, int> split_addr(const std::string& addr) {
    auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw tbac::ParseError("gateway address needs host:port");
    return {addr.substr(0, colon), std::stoi(addr.substr(colon + 1))};
}

tbac::ExperimentSpec make_spec(const ExpOptions& opt, const tbac::GatewayConfig& cfg) {
    tbac::ExperimentSpec spec;
    spec.consumer = opt.consumer;
    spec.key = opt.key;
    spec.target = opt.target;
    spec.request_count = opt.count;
    spec.service_range = split_csv(opt.services);
    spec.seed = opt.seed;
    spec.time_scale = cfg.time_scale;
    for (const auto& r : split_csv(opt.schedule))
        if (!r.empty()) spec.frequency_schedule.push_back(std::stod(r));
    for (const auto& s : split_csv(opt.sizes))
        if (!s.empty()) spec.tbm_scale.push_back(std::stoull(s));
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Behavior-aware service access gateway toolkit"};
    app.require_subcommand(1);

    // ---- model validate ----
    auto* model_cmd = app.add_subcommand("model", "service graph utilities");
    model_cmd->require_subcommand(1);
    std::string model_path;
    auto* validate_cmd = model_cmd->add_subcommand("validate", "validate a model file");
    validate_cmd->add_option("file", model_path)->required();

    // ---- tbm create/append/show ----
    auto* tbm_cmd = app.add_subcommand("tbm", "trusted behavior model tooling");
    tbm_cmd->require_subcommand(1);
    std::string tbm_srm, tbm_model, tbm_out_dir = ".", tbm_file, tbm_rules_file, tbm_out_file;
    auto* create_cmd = tbm_cmd->add_subcommand("create", "compile TBM files from an SRM");
    create_cmd->add_option("--srm", tbm_srm)->required();
    create_cmd->add_option("--model", tbm_model)->required();
    create_cmd->add_option("--out-dir", tbm_out_dir);
    auto* append_cmd = tbm_cmd->add_subcommand("append", "merge extra rules into a TBM file");
    append_cmd->add_option("--tbm", tbm_file)->required();
    append_cmd->add_option("--rules", tbm_rules_file, "TBM-format file with rules to add")
        ->required();
    append_cmd->add_option("--out", tbm_out_file, "output path (default: in place)");
    auto* show_cmd = tbm_cmd->add_subcommand("show", "print a TBM file canonically");
    show_cmd->add_option("--tbm", tbm_file)->required();

    // ---- srm hash ----
    auto* srm_cmd = app.add_subcommand("srm", "releasing policy utilities");
    srm_cmd->require_subcommand(1);
    std::string h_consumer, h_target, h_key;
    auto* hash_cmd = srm_cmd->add_subcommand("hash", "print the key digest for an SRM rule");
    hash_cmd->add_option("--consumer", h_consumer)->required();
    hash_cmd->add_option("--target", h_target)->required();
    hash_cmd->add_option("--key", h_key)->required();

    // ---- serve ----
    auto* serve_cmd = app.add_subcommand("serve", "run the enforcement gateway");
    std::string serve_config;
    serve_cmd->add_option("--config", serve_config)->required();

    // ---- exp supervise/deauth/scale ----
    auto* exp_cmd = app.add_subcommand("exp", "experiment drivers");
    exp_cmd->require_subcommand(1);
    ExpOptions sup_opt, deauth_opt, scale_opt;
    auto* sup_cmd = exp_cmd->add_subcommand("supervise", "random access mix through one session");
    add_exp_common(sup_cmd, sup_opt);
    sup_cmd->add_option("--count", sup_opt.count);
    auto* deauth_cmd = exp_cmd->add_subcommand("deauth", "threshold-triggered deauthorization");
    add_exp_common(deauth_cmd, deauth_opt);
    deauth_cmd->add_option("--mode", deauth_opt.mode, "uar|afr");
    deauth_cmd->add_option("--count", deauth_opt.count);
    deauth_cmd->add_option("--schedule", deauth_opt.schedule,
                           "comma separated requests/minute per group");
    auto* scale_cmd = exp_cmd->add_subcommand("scale", "latency vs TBM rule count");
    add_exp_common(scale_cmd, scale_opt);
    scale_cmd->add_option("--sizes", scale_opt.sizes, "comma separated rule counts")->required();

    // ---- blacklist list/remove ----
    auto* bl_cmd = app.add_subcommand("blacklist", "blacklist administration");
    bl_cmd->require_subcommand(1);
    std::string bl_file = "blacklist.txt", bl_consumer;
    auto* bl_list_cmd = bl_cmd->add_subcommand("list", "print blacklist entries");
    bl_list_cmd->add_option("--file", bl_file);
    auto* bl_remove_cmd = bl_cmd->add_subcommand("remove", "remove one entry durably");
    bl_remove_cmd->add_option("consumer", bl_consumer)->required();
    bl_remove_cmd->add_option("--file", bl_file);

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate_cmd->parsed()) {
            auto model = load_model_file(model_path);
            std::cout << "ok: " << model.services().size() << " services, "
                      << model.transitions().size() << " transitions, initial "
                      << model.initial() << "\n";
            return 0;
        }

        if (create_cmd->parsed()) {
            auto model = load_model_file(tbm_model);
            auto srm = load_srm_file(tbm_srm, model);
            if (srm.rules().empty())
                std::cerr << "warning: SRM has no rules, nothing to compile\n";
            fs::create_directories(tbm_out_dir);
            for (const auto& rule : srm.rules()) {
                auto tbm = tbac::compile_tbm(rule, model);
                fs::path out_path =
                    fs::path(tbm_out_dir) / ("tbm_" + rule.consumer + "_" + rule.target + ".txt");
                std::ofstream out(out_path);
                tbac::write_tbm(out, tbm);
                std::cout << out_path.string() << ": " << tbm.size() << " rules\n";
            }
            return 0;
        }

        if (append_cmd->parsed()) {
            std::ifstream base_in(tbm_file);
            if (!base_in) throw tbac::ParseError("cannot open tbm file: " + tbm_file);
            auto base = tbac::parse_tbm(base_in);
            std::ifstream extra_in(tbm_rules_file);
            if (!extra_in) throw tbac::ParseError("cannot open rules file: " + tbm_rules_file);
            auto extra = tbac::parse_tbm(extra_in);
            auto merged = tbac::append_rules(base, extra.rules());
            std::ofstream out(tbm_out_file.empty() ? tbm_file : tbm_out_file);
            tbac::write_tbm(out, merged);
            std::cout << merged.size() << " rules\n";
            return 0;
        }

        if (show_cmd->parsed()) {
            std::ifstream in(tbm_file);
            if (!in) throw tbac::ParseError("cannot open tbm file: " + tbm_file);
            tbac::write_tbm(std::cout, tbac::parse_tbm(in));
            return 0;
        }

        if (hash_cmd->parsed()) {
            std::cout << tbac::key_digest(h_consumer, h_target, h_key) << "\n";
            return 0;
        }

        if (serve_cmd->parsed()) {
            auto cfg = tbac::load_config(serve_config);
            auto gateway = tbac::make_gateway_from_config(cfg);
            int port = gateway->start();
            std::cout << "listening on " << cfg.listen_host << ":" << port << "\n";
            std::promise<void>().get_future().wait();  // serve until killed
            return 0;
        }

        if (sup_cmd->parsed() || deauth_cmd->parsed() || scale_cmd->parsed()) {
            ExpOptions& opt = sup_cmd->parsed() ? sup_opt
                              : deauth_cmd->parsed() ? deauth_opt
                                                     : scale_opt;
            auto cfg = tbac::load_config(opt.config_path);
            auto model = load_model_file(cfg.model_path);
            auto [host, port] = split_addr(opt.gateway);
            auto spec = make_spec(opt, cfg);

            tbac::ExperimentReport report;
            std::string name;
            if (sup_cmd->parsed()) {
                report = tbac::run_supervision(spec, model, host, port);
                name = "supervision";
            } else if (deauth_cmd->parsed()) {
                if (opt.mode == "uar") {
                    report = tbac::run_supervision(spec, model, host, port);
                    name = "deauth_uar";
                } else if (opt.mode == "afr") {
                    report = tbac::run_afr_schedule(spec, model, host, port);
                    name = "deauth_afr";
                } else {
                    throw tbac::ParseError("deauth mode must be uar or afr");
                }
            } else {
                report = tbac::run_scaling(spec, model, host, port);
                name = "scaling";
            }
            report.write(opt.out_dir, name);
            std::cout << report.to_json().dump(2) << "\n";
            return 0;
        }

        if (bl_list_cmd->parsed()) {
            tbac::Blacklist bl(bl_file);
            for (const auto& e : bl.list())
                std::cout << e.consumer << ' ' << e.banned_at_unix_ms << ' ' << e.reason << "\n";
            return 0;
        }

        if (bl_remove_cmd->parsed()) {
            tbac::Blacklist bl(bl_file);
            if (!bl.remove(bl_consumer)) {
                std::cerr << "not found: " << bl_consumer << "\n";
                return 1;
            }
            std::cout << "removed " << bl_consumer << "\n";
            return 0;
        }
    } catch (const tbac::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const tbac::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const tbac::UnreachableService& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
