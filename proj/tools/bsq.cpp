#include <iostream>
#include <string>

#include <CLI11.hpp>

#include <bsq/runner.hpp>

namespace {

int exit_code(bsq::ErrorKind k) {
    switch (k) {
        case bsq::ErrorKind::ConfigInvalid:
        case bsq::ErrorKind::InvalidModel: return 2;
        case bsq::ErrorKind::IoError: return 4;
        default: return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bohr-Sommerfeld spectra of non-selfadjoint operators in two dimensions"};
    app.require_subcommand(1, 1);
    std::string config_path;
    bsq::Overrides o;
    double h = 0.0, tol = 0.0;
    int resolution = 0;
    std::string out, format;

    for (const auto& entry : bsq::command_names()) {
        CLI::App* sub = app.add_subcommand(entry.first, "run the " + entry.first + " command");
        sub->set_help_flag("--help", "print this help message and exit");
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--h", h, "semiclassical parameter");
        sub->add_option("--out", out, "output file (stdout if omitted)");
        sub->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
        sub->add_option("--resolution", resolution, "grid size N");
        sub->add_option("--tol", tol, "solver tolerance");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--h")) o.h = h;
    if (sub->count("--tol")) o.tol = tol;
    if (sub->count("--resolution")) o.resolution = resolution;
    if (sub->count("--out")) o.out = out;
    if (sub->count("--format")) o.format = format;

    try {
        bsq::json j = bsq::read_json_file(config_path);
        if (!j.is_object()) throw bsq::Error(bsq::ErrorKind::ConfigInvalid, "config: expected an object");
        if (j.contains("command") && j["command"] != sub->get_name()) {
            throw bsq::Error(bsq::ErrorKind::ConfigInvalid,
                             "command: config says " + j["command"].dump() + " but " + sub->get_name() + " was requested");
        }
        j["command"] = sub->get_name();
        bsq::apply_overrides(j, o);
        const bsq::RunConfig cfg = bsq::parse_config(j);
        const bsq::RunReport report = bsq::run(cfg);
        const std::string text = bsq::emit(report, cfg.output.format);
        if (cfg.output.path.empty()) {
            std::cout << text;
        } else {
            bsq::write_file(cfg.output.path, text);
        }
    } catch (const bsq::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
