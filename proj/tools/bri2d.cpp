// Command-line front end: scenario runs, analytics tables, field sampling
// and rendering.
//
// Exit codes: 0 all rows pass, 2 some row fails, 3 some row is
// indeterminate, 1 usage or configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bri2d/analytics_table.hpp"
#include "bri2d/config.hpp"
#include "bri2d/experiments.hpp"
#include "bri2d/field_io.hpp"
#include "bri2d/svg.hpp"

namespace
{
using namespace bri2d;

//! Apply "key=value" overrides
void apply_overrides(KeyValues& kv, std::vector<std::string> const& sets)
{
    for (auto const& s : sets)
    {
        auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
        {
            throw std::invalid_argument("--set expects key=value, got " + s);
        }
        kv.set(s.substr(0, eq), s.substr(eq + 1));
    }
}

void print_rows(std::vector<EstimateReport> const& rows)
{
    for (auto const& r : rows)
    {
        std::printf("%-13s %-28s %-48s est=%-12.6g cmp=%-12.6g tol=%-10.4g %s\n",
                    to_string(r.verdict), r.point.c_str(), r.quantity.c_str(),
                    r.estimate, r.comparator, r.tolerance, r.note.c_str());
    }
}

int exit_code(Verdict v)
{
    switch (v)
    {
        case Verdict::pass: return 0;
        case Verdict::fail: return 2;
        case Verdict::indeterminate: return 3;
    }
    return 1;
}
}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Two-dimensional Brownian random interlacements"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run a validation scenario");
    std::string config_path, scenario, out_dir;
    std::vector<std::string> sets;
    std::size_t replicas = 0;
    std::uint64_t seed = 0;
    unsigned workers = 0;
    bool svg = false;
    run->add_option("-c,--config", config_path, "Scenario config file");
    run->add_option("-s,--scenario", scenario, "Scenario name");
    run->add_option("-n,--replicas", replicas, "Replica count");
    run->add_option("--seed", seed, "Master seed");
    run->add_option("-o,--out", out_dir, "Output directory");
    run->add_option("-j,--workers", workers, "Worker threads");
    run->add_flag("--svg", svg, "Write SVG figures");
    run->add_option("--set", sets, "Parameter override key=value");
    bool list = false;
    run->add_flag("--list", list, "List scenarios");

    // table
    auto* table = app.add_subcommand("table", "Tabulate an analytics operation");
    std::string op, grid_path;
    std::vector<std::string> grid_sets;
    table->add_option("op", op, "Operation name")->required();
    table->add_option("-g,--grid", grid_path, "Grid file of input lists");
    table->add_option("--set", grid_sets, "Input list name=v1,v2,...");

    // sample
    auto* sample = app.add_subcommand("sample", "Sample a field and save it");
    double alpha = 1, window = 3;
    std::uint64_t field_seed = 1, stream = 0;
    std::string field_out;
    bool bessel = false;
    sample->add_option("-a,--alpha", alpha, "Top level")->check(CLI::PositiveNumber);
    sample->add_option("-w,--window", window, "Window radius")->check(CLI::PositiveNumber);
    sample->add_option("--seed", field_seed, "Seed");
    sample->add_option("--stream", stream, "Stream id");
    sample->add_flag("--bessel", bessel, "Use the Bessel construction");
    sample->add_option("-o,--out", field_out, "Field file")->required();

    // render
    auto* render = app.add_subcommand("render", "Render a saved field as SVG");
    std::string field_in, svg_out;
    double level = 0, half = 0, pixels = 800;
    bool component = false;
    render->add_option("field", field_in, "Field file")->required();
    render->add_option("-o,--out", svg_out, "SVG file")->required();
    render->add_option("-a,--alpha", level, "Level (default: top level)");
    render->add_option("--half-width", half, "View half width (default: window)");
    render->add_option("--pixels", pixels, "Image size");
    render->add_flag("--component", component, "Fill the component of 0");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*run)
        {
            if (list)
            {
                for (auto const& [name, info] : scenario_registry())
                {
                    std::printf("%-26s default replicas %zu\n", name.c_str(),
                                info.default_replicas);
                }
                return 0;
            }
            KeyValues kv = config_path.empty() ? KeyValues{} : KeyValues::load(config_path);
            apply_overrides(kv, sets);
            auto cfg = ScenarioConfig::from(kv);
            if (!scenario.empty())
            {
                cfg.scenario = scenario;
            }
            if (replicas)
            {
                cfg.replicas = replicas;
            }
            if (run->count("--seed"))
            {
                cfg.seed = seed;
            }
            if (!out_dir.empty())
            {
                cfg.out_dir = out_dir;
            }
            if (workers)
            {
                cfg.workers = workers;
            }
            cfg.emit_svg = cfg.emit_svg || svg;
            auto rows = run_scenario(cfg);
            print_rows(rows);
            return exit_code(worst(rows));
        }
        if (*table)
        {
            KeyValues grid = grid_path.empty() ? KeyValues{} : KeyValues::load(grid_path);
            apply_overrides(grid, grid_sets);
            emit_table(op, grid, std::cout);
            return 0;
        }
        if (*sample)
        {
            RngStream rng{field_seed, stream};
            auto f = bessel ? assemble_field_bessel(alpha, 1.0, window, rng)
                            : assemble_field(alpha, 1.0, window, rng);
            save_field(field_out, f);
            std::printf("%zu trajectories written to %s\n", f.entries.size(),
                        field_out.c_str());
            return 0;
        }
        if (*render)
        {
            auto f = load_field(field_in);
            SvgStyle style;
            style.view.half_width = half > 0 ? half : f.window_radius;
            style.pixels = pixels;
            double a = level > 0 ? level : f.alpha_max;
            std::optional<RasterComponent> comp;
            if (component)
            {
                comp = extract_component(f, a, Point{0, 0},
                                         style.view.half_width / 200, style.view);
            }
            SvgScene scene{&f, a, comp ? &*comp : nullptr};
            std::ofstream os(svg_out);
            os << render_svg(scene, style);
            return os ? 0 : 1;
        }
    }
    catch (std::exception const& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
