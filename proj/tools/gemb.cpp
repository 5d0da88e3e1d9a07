// Command-line front end: one subcommand per experiment kind.
#include <iostream>

#include "CLI11.hpp"
#include "gemb/gemb.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Graph embedding subsampling and regularization experiments"};
  app.require_subcommand(1);
  std::string manifest_path, out_dir;
  for (const auto& [name, kind] : gemb::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--manifest", manifest_path, "experiment manifest (INI)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->required();
  }
  CLI11_PARSE(app, argc, argv);

  const auto kind = gemb::parse_experiment(app.get_subcommands().front()->get_name());
  try {
    const auto manifest = gemb::load_manifest(manifest_path, kind);
    const auto result = gemb::run(manifest, out_dir);
    for (const auto& a : result.assertions)
      std::cout << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << a.detail << '\n';
    std::cout << "wrote " << result.artifacts.size() << " artifacts to " << out_dir << '\n';
    return result.ok() ? 0 : 1;
  } catch (const gemb::ParseError& e) {
    std::cerr << manifest_path << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 2;
}
