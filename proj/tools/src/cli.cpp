// Copyright 2026 The TrajFM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "trajfm/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "trajfm/checkpoint.hpp"
#include "trajfm/data.hpp"
#include "trajfm/error.hpp"
#include "trajfm/pretrain.hpp"
#include "trajfm/strformer.hpp"
#include "trajfm/tasks.hpp"
#include "trajfm/verify.hpp"

namespace trajfm::cli {
namespace fs = std::filesystem;

RunConfig RunConfig::resolve(const std::optional<fs::path>& file,
                             const std::vector<std::string>& assignments) {
  RunConfig rc;
  if (file) rc.values = KvConfig::load(*file);
  for (const auto& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError("--set expects key=value, got '" + a + "'");
    }
    rc.values.set(a.substr(0, eq), a.substr(eq + 1));
  }
  return rc;
}

std::string RunConfig::render() const {
  return "# resolved configuration\n" + values.to_string();
}

std::unique_ptr<embedding::PoiVectorProvider> make_provider(const KvConfig& cfg) {
  const std::string kind = cfg.get_string("poi_provider", "synthetic");
  const auto dim = static_cast<std::size_t>(cfg.get_int("poi_dim", 64));
  if (kind == "synthetic") {
    return std::make_unique<embedding::SyntheticPoiProvider>(cfg.get_uint("poi_seed", 0), dim);
  }
  if (kind == "file") {
    const auto table = cfg.get("poi_table");
    if (!table) throw UsageError("poi_provider = file needs poi_table");
    return std::make_unique<embedding::FilePoiProvider>(embedding::FilePoiProvider::load(*table));
  }
  throw UsageError("unknown poi_provider '" + kind + "' (expected synthetic or file)");
}

namespace {

struct Common {
  std::optional<fs::path> config;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config, "key = value settings file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.set, "override one setting (key=value), repeatable");
  cmd->add_option("--seed", c.seed, "random seed (overrides the `seed` key)");
  auto* o = cmd->add_option("--out", c.out, "output path");
  if (out_required) o->required();
}

RunConfig resolve(const Common& c) {
  RunConfig rc = RunConfig::resolve(c.config, c.set);
  if (c.seed) rc.values.set("seed", std::to_string(*c.seed));
  if (!rc.values.contains("seed")) rc.values.set("seed", "0");
  return rc;
}

// Raw directories are preprocessed in memory so every command sees splits.
data::Dataset load_split(const fs::path& dir, std::ostream& out) {
  data::Dataset ds = data::load_dataset_dir(dir);
  if (ds.split.empty()) {
    out << "note: " << dir.string() << " is not preprocessed; preprocessing in memory\n";
    ds = data::preprocess(std::move(ds));
  }
  return ds;
}

std::vector<data::Trajectory> select(const data::Dataset& ds, const std::string& which) {
  if (which == "all") return ds.trajectories;
  return ds.subset(data::parse_split(which));
}

int cmd_synth(const Common& c, std::ostream& out) {
  RunConfig rc = resolve(c);
  const data::SynthConfig sc = data::SynthConfig::from_config(rc.values);
  rc.values.merge(sc.to_config());
  out << rc.render();
  const data::Dataset ds = data::generate_synthetic(sc, rc.seed());
  data::save_dataset_dir(*c.out, ds);
  out << "wrote " << ds.trajectories.size() << " trajectories and " << ds.pois.size()
      << " POIs to " << c.out->string() << "\n";
  return 0;
}

int cmd_preprocess(const Common& c, const fs::path& in, std::ostream& out) {
  const RunConfig rc = resolve(c);
  out << rc.render();
  data::Dataset ds = data::load_dataset_dir(in);
  if (!ds.split.empty()) {
    out << "input is already preprocessed; copying through\n";
  }
  const std::size_t raw = ds.trajectories.size();
  ds = data::preprocess(std::move(ds));
  data::save_dataset_dir(*c.out, ds);
  out << "kept " << ds.trajectories.size() << " of " << raw << " trajectories (train "
      << ds.subset(data::Split::kTrain).size() << ", validation "
      << ds.subset(data::Split::kValidation).size() << ", test "
      << ds.subset(data::Split::kTest).size() << ")\n";
  return 0;
}

int cmd_pretrain(const Common& c, const fs::path& data_dir, std::optional<int> epochs,
                 std::ostream& out) {
  RunConfig rc = resolve(c);
  if (epochs) rc.values.set("epochs", std::to_string(*epochs));
  const model::ModelConfig mc = model::ModelConfig::from_config(rc.values);
  const pretrain::TrainConfig tc = pretrain::TrainConfig::from_config(rc.values);
  rc.values.merge(mc.to_config());
  rc.values.merge(tc.to_config());
  if (!rc.values.contains("poi_provider")) rc.values.set("poi_provider", "synthetic");
  rc.values.set("poi_dim", std::to_string(mc.poi_dim));
  out << rc.render();

  const data::Dataset ds = load_split(data_dir, out);
  const auto train = ds.subset(data::Split::kTrain);
  if (train.empty()) throw DataError("no training trajectories in " + data_dir.string());
  const geo::Region region(ds.region);
  const data::PoiIndex index(ds.pois);
  const auto provider = make_provider(rc.values);
  const model::Model<float> m(mc, *provider);
  auto params = m.init_params(tc.seed);

  const fs::path loss_path = fs::path(c.out->string() + ".loss.csv");
  std::ofstream loss_file(loss_path, std::ios::trunc);
  if (!loss_file) throw DataError("cannot write " + loss_path.string());
  loss_file << "epoch,mean_loss\n";
  const auto result = pretrain::pretrain(
      m, params, train, region, index, tc, [&](int epoch, double loss) {
        char line[96];
        std::snprintf(line, sizeof line, "epoch %d mean_loss %.6f\n", epoch, loss);
        out << line << std::flush;
        std::snprintf(line, sizeof line, "%d,%.9g\n", epoch, loss);
        loss_file << line << std::flush;
      });

  pretrain::Checkpoint ckpt;
  ckpt.config = rc.values;
  ckpt.seed = tc.seed;
  ckpt.step = result.steps;
  ckpt.params = std::move(params);
  pretrain::save_checkpoint(*c.out, ckpt);
  out << "wrote checkpoint " << c.out->string() << " (" << result.steps
      << " steps) and loss history " << loss_path.string() << "\n";
  return 0;
}

int cmd_eval(const Common& c, const fs::path& checkpoint, const fs::path& data_dir,
             const std::string& task_name, std::ostream& out) {
  const tasks::Task task = tasks::parse_task(task_name);
  pretrain::Checkpoint ckpt = pretrain::load_checkpoint(checkpoint);
  RunConfig rc;
  rc.values = ckpt.config;
  rc.values.merge(resolve(c).values);
  rc.values.set("task", task_name);
  const std::string which = rc.values.get_string("split", "test");
  out << rc.render();

  const model::ModelConfig mc = model::ModelConfig::from_config(ckpt.config);
  const auto provider = make_provider(rc.values);
  const model::Model<float> m(mc, *provider);
  const data::Dataset ds = load_split(data_dir, out);
  const auto trajectories = select(ds, which);
  const geo::Region region(ds.region);
  const data::PoiIndex index(ds.pois);
  const tasks::TaskContext<float> ctx{m, ckpt.params, region, index};
  const tasks::TaskResult res = tasks::evaluate(task, trajectories, ctx);

  const std::string report = tasks::report_json(res, checkpoint.string());
  out << report << "\n";
  if (task == tasks::Task::kTrajPred) {
    const auto base = tasks::last_observed_baseline(trajectories);
    char line[128];
    std::snprintf(line, sizeof line, "last-observed baseline mae %.3f rmse %.3f (n=%zu)\n",
                  base.mae, base.rmse, base.n);
    out << line;
  }
  if (res.skipped > 0) out << "skipped " << res.skipped << " trajectories too short for the task\n";
  if (c.out) {
    std::ofstream f(*c.out, std::ios::trunc);
    if (!f) throw DataError("cannot write " + c.out->string());
    f << report << "\n";
  }
  return 0;
}

int cmd_gradcheck(const Common& c, std::ostream& out) {
  RunConfig rc = resolve(c);
  if (!rc.values.contains("d")) rc.values.set("d", "16");
  if (!rc.values.contains("layers")) rc.values.set("layers", "2");
  const model::ModelConfig mc = model::ModelConfig::from_config(rc.values);
  nn::GradCheckOptions opt;
  opt.samples = static_cast<std::size_t>(rc.values.get_int("samples", 200));
  opt.h = rc.values.get_double("h", 1e-5);
  opt.tolerance = rc.values.get_double("tolerance", 1e-4);
  opt.seed = rc.seed();
  rc.values.merge(mc.to_config());
  rc.values.set("samples", std::to_string(opt.samples));
  out << rc.render();
  const auto provider = make_provider(rc.values);
  const auto rep = pretrain::full_loss_gradcheck(mc, *provider, rc.seed(), opt);
  char line[160];
  std::snprintf(line, sizeof line,
                "max_relative_error %.3e (worst %s), %zu coordinates over %zu tensors, precision "
                "float64\n",
                rep.max_error, rep.worst_param.c_str(), rep.entries.size(), rep.tensors_covered);
  out << line << (rep.passed ? "PASS" : "FAIL") << " at tolerance " << opt.tolerance << "\n";
  if (!rep.passed) throw NumericalError("gradient check failed");
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trajectory foundation model: data, pre-training and evaluation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Common common;
  fs::path in_dir, data_dir, checkpoint;
  std::string task;
  std::optional<int> epochs;

  auto* synth = app.add_subcommand("synth", "generate one synthetic region");
  add_common(synth, common, true);

  auto* prep = app.add_subcommand("preprocess", "resample, filter, split and POI-annotate");
  add_common(prep, common, true);
  prep->add_option("--in", in_dir, "raw dataset directory")->required();

  auto* train = app.add_subcommand("pretrain", "masked recovery pre-training");
  add_common(train, common, true);
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--epochs", epochs, "override the epoch count");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a downstream task");
  add_common(eval, common, false);
  eval->add_option("--task", task, "traj-eta | od-eta | traj-pred")->required();
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of the full loss");
  add_common(grad, common, false);

  std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kUsage);
  }

  try {
    if (synth->parsed()) return cmd_synth(common, out);
    if (prep->parsed()) return cmd_preprocess(common, in_dir, out);
    if (train->parsed()) return cmd_pretrain(common, data_dir, epochs, out);
    if (eval->parsed()) return cmd_eval(common, checkpoint, data_dir, task, out);
    if (grad->parsed()) return cmd_gradcheck(common, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kData);
  }
  return static_cast<int>(ErrorKind::kUsage);
}

}  // namespace trajfm::cli
