// raincal command-line driver.
//
//   raincal <simulate|fit|predict|verify|report> --config FILE [--method M] [--seed N] [--out DIR] [--jobs N]
//
// Exit status: 0 success, 1 bad input or configuration, 2 internal failure.

#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "raincal/error.hpp"
#include "raincal/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string method;
  std::string seed;
  std::string out;
  std::string jobs;
};

raincal::PipelineConfig load(const Overrides& o) {
  auto c = o.config.empty() ? raincal::PipelineConfig{} : raincal::PipelineConfig::from_file(o.config);
  if (!o.method.empty()) c.set("method", o.method);
  if (!o.seed.empty()) c.set("seed", o.seed);
  if (!o.out.empty()) c.set("out", o.out);
  if (!o.jobs.empty()) c.set("jobs", o.jobs);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rainfall ensemble post-processing and verification"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value configuration file");
    sub->add_option("--method", o.method, "method name, comma separated list, or 'all'");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--jobs", o.jobs, "worker threads");
  };
  auto* simulate = app.add_subcommand("simulate", "write a synthetic dataset (data.csv, truth.csv)");
  auto* fit = app.add_subcommand("fit", "fit per-station models on all labeled cases");
  auto* predict = app.add_subcommand("predict", "apply fitted models to the configured data");
  auto* verify = app.add_subcommand("verify", "cross-validate, write predictions and score reports");
  auto* report = app.add_subcommand("report", "re-score existing prediction files");
  for (auto* sub : {simulate, fit, predict, verify, report}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto config = load(o);
    if (*simulate) raincal::run_simulate(config);
    else if (*fit) raincal::run_fit(config);
    else if (*predict) raincal::run_predict(config);
    else if (*verify) raincal::run_verify(config);
    else if (*report) raincal::run_report(config);
    return 0;
  } catch (const raincal::ConfigError& e) {
    std::cerr << "raincal: configuration error: " << e.what() << '\n';
    return 1;
  } catch (const raincal::DataError& e) {
    std::cerr << "raincal: data error: " << e.what() << '\n';
    return 1;
  } catch (const raincal::DomainError& e) {
    std::cerr << "raincal: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "raincal: internal error: " << e.what() << '\n';
    return 2;
  }
}
