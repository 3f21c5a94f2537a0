#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "vai/cli/pipeline.hpp"
#include "vai/core/errors.hpp"

namespace {

void usage(std::ostream& os) {
  os << "usage: vai <command> [--config PATH] [--key value ...]\n"
        "\n"
        "commands:\n"
        "  collect          roll out random actions and save the frame dataset\n"
        "  train-keypoints  train the keypoint model on the dataset\n"
        "  extract-masks    threshold counterfactual difference maps into masks\n"
        "  train-adapter    train the distraction-removal adapter on masked frames\n"
        "  train-policy     train the control policy on adapted observations\n"
        "  evaluate         run the saved policy over evaluation seeds/episodes\n"
        "  visualize        write raw/adapted grids and keypoint/mask overlays\n"
        "\n"
        "options:\n"
        "  --config PATH      load a key = value config file\n"
        "  --output DIR       output_dir (artifacts and run.log)\n"
        "  --seed N           master seed\n"
        "  --count N          dataset.count\n"
        "  --texture NAME     evaluation.texture\n"
        "  --seeds N          evaluation.seeds\n"
        "  --episodes N       evaluation.episodes\n"
        "  --denoise-alpha X  evaluation.denoise_alpha\n"
        "  --lambda X         adapter.lambda\n"
        "  --epsilon X        attention.epsilon (negative: calibrate by quantile)\n"
        "  --quantile X       attention.quantile\n"
        "  --input PATH       visualize input frame (repeatable)\n"
        "  --<section.key> V  set any config key directly\n";
}

const std::map<std::string, std::string> kAliases = {
    {"--count", "dataset.count"},
    {"--texture", "evaluation.texture"},
    {"--seeds", "evaluation.seeds"},
    {"--episodes", "evaluation.episodes"},
    {"--denoise-alpha", "evaluation.denoise_alpha"},
    {"--lambda", "adapter.lambda"},
    {"--seed", "seed"},
    {"--output", "output_dir"},
    {"--epsilon", "attention.epsilon"},
    {"--quantile", "attention.quantile"},
};

}  // namespace

int main(int argc, char** argv) {
  using namespace vai;
  try {
    if (argc < 2) {
      usage(std::cerr);
      return 1;
    }
    const std::string command = argv[1];
    if (command == "help" || command == "-h" || command == "--help") {
      usage(std::cout);
      return 0;
    }

    Config cfg = Config::pipeline_defaults();
    std::vector<std::string> inputs;
    for (int i = 2; i < argc; ++i) {
      const std::string arg = argv[i];
      auto value_of = [&]() -> std::string {
        if (i + 1 >= argc) throw ConfigError("missing value for " + arg);
        return argv[++i];
      };
      if (arg == "--config") {
        cfg.load_file(value_of());
      } else if (arg == "--input") {
        inputs.push_back(value_of());
      } else if (auto it = kAliases.find(arg); it != kAliases.end()) {
        cfg.set(it->second, value_of());
      } else if (arg.rfind("--", 0) == 0 && arg.find('.') != std::string::npos) {
        cfg.set(arg.substr(2), value_of());
      } else {
        throw ConfigError("unknown argument: " + arg);
      }
    }

    if (command == "collect") cli::run_collect(cfg);
    else if (command == "train-keypoints") cli::run_train_keypoints(cfg);
    else if (command == "extract-masks") cli::run_extract_masks(cfg);
    else if (command == "train-adapter") cli::run_train_adapter(cfg);
    else if (command == "train-policy") cli::run_train_policy(cfg);
    else if (command == "evaluate") cli::run_evaluate(cfg);
    else if (command == "visualize") cli::run_visualize(cfg, inputs);
    else {
      std::cerr << "unknown command: " << command << "\n\n";
      usage(std::cerr);
      return 1;
    }
    return 0;
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
