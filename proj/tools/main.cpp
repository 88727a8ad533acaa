#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "throwsim/commands.hpp"
#include "throwsim/ppo.hpp"
#include "throwsim/sysid.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonArgs {
  std::string config;
  std::string seed_flag;
  std::string out_flag;
  int workers = -1;
};

throwsim::RunOverrides make_overrides(const CommonArgs& args) {
  throwsim::RunOverrides ov;
  // Precedence: flag > environment variable > config file.
  if (const char* env_seed = std::getenv("THROWSIM_SEED")) {
    ov.has_seed = true;
    ov.seed = std::strtoull(env_seed, nullptr, 10);
  }
  if (const char* env_out = std::getenv("THROWSIM_OUT")) {
    ov.has_out = true;
    ov.out_dir = env_out;
  }
  if (!args.seed_flag.empty()) {
    ov.has_seed = true;
    ov.seed = std::strtoull(args.seed_flag.c_str(), nullptr, 10);
  }
  if (!args.out_flag.empty()) {
    ov.has_out = true;
    ov.out_dir = args.out_flag;
  }
  if (args.workers >= 0) {
    ov.has_workers = true;
    ov.workers = args.workers;
  }
  return ov;
}

void add_common(CLI::App* cmd, CommonArgs* args, bool config_required = true) {
  cmd->add_option("--config", args->config, "Run configuration file")
      ->required(config_required);
  cmd->add_option("--seed", args->seed_flag, "Override the run seed");
  cmd->add_option("--out", args->out_flag, "Override the output directory");
  cmd->add_option("--workers", args->workers, "Worker thread cap (0 = hardware)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic-throwing toolkit for an underactuated material handler"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, rollout_args;
  std::string eval_checkpoint, rollout_checkpoint, rollout_trace;
  std::string identify_kind, identify_log, identify_out = "out";
  double identify_length = 0.97;  // nominal gripper pendulum length [m]

  CLI::App* train_cmd = app.add_subcommand("train", "Train a throwing policy");
  add_common(train_cmd, &train_args);

  CLI::App* eval_cmd = app.add_subcommand("eval", "Run a target sweep with a trained policy");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Policy checkpoint")->required();
  add_common(eval_cmd, &eval_args);

  CLI::App* id_cmd = app.add_subcommand("identify", "Fit friction or release-delay parameters");
  id_cmd->add_option("--kind", identify_kind, "friction|delay")->required();
  id_cmd->add_option("--log", identify_log, "Input log CSV")->required();
  id_cmd->add_option("--length", identify_length, "Pendulum length for friction fits [m]");
  id_cmd->add_option("--out", identify_out, "Output directory");

  CLI::App* roll_cmd = app.add_subcommand("rollout", "Trace a single deterministic episode");
  roll_cmd->add_option("--checkpoint", rollout_checkpoint, "Policy checkpoint")->required();
  roll_cmd->add_option("--trace", rollout_trace, "Trace CSV path (default <out>/trace.csv)");
  add_common(roll_cmd, &rollout_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train_cmd->parsed()) {
      const auto rc = throwsim::load_run_config(train_args.config, make_overrides(train_args));
      throwsim::configure_workers(rc.workers);
      throwsim::cmd_train(rc);
    } else if (eval_cmd->parsed()) {
      const auto rc = throwsim::load_run_config(eval_args.config, make_overrides(eval_args));
      throwsim::configure_workers(rc.workers);
      throwsim::cmd_eval(eval_checkpoint, rc);
    } else if (id_cmd->parsed()) {
      if (const char* env_out = std::getenv("THROWSIM_OUT")) identify_out = env_out;
      throwsim::cmd_identify(identify_kind, identify_log, identify_length, identify_out);
    } else if (roll_cmd->parsed()) {
      const auto rc = throwsim::load_run_config(rollout_args.config, make_overrides(rollout_args));
      throwsim::configure_workers(rc.workers);
      const std::string trace =
          rollout_trace.empty() ? rc.out_dir + "/trace.csv" : rollout_trace;
      throwsim::cmd_rollout(rollout_checkpoint, rc, trace);
    }
  } catch (const throwsim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const throwsim::SysidError& e) {
    std::fprintf(stderr, "identification error: %s\n", e.what());
    return kExitRuntime;
  } catch (const throwsim::TrainingDiverged& e) {
    std::fprintf(stderr, "training aborted: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
