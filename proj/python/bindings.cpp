// Copyright 2026 The mast-cpp Authors. All Rights Reserved.
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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mast/gradcheck.hpp"
#include "mast/ssl.hpp"
#include "mast/trainer.hpp"

namespace py = pybind11;
using namespace mast;

namespace {

using Arr = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor tensor_from(const Arr& a) {
  Shape shape;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) {
    shape.push_back(static_cast<int>(a.shape(i)));
  }
  std::vector<float> data(a.data(), a.data() + a.size());
  return Tensor::from_data(std::move(shape), std::move(data));
}

py::array to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return std::move(out);
}

Spectrogram spec_from(const Arr& a) {
  if (a.ndim() != 2) throw ArgumentError("expected a [T, F] array");
  Spectrogram s;
  s.t = static_cast<int>(a.shape(0));
  s.f = static_cast<int>(a.shape(1));
  s.frames.assign(a.data(), a.data() + a.size());
  return s;
}

py::array spec_to_numpy(const Spectrogram& s) {
  py::array_t<float> out({static_cast<py::ssize_t>(s.t),
                          static_cast<py::ssize_t>(s.f)});
  std::copy(s.frames.begin(), s.frames.end(), out.mutable_data());
  return std::move(out);
}

ModelConfig config_from_dict(const py::dict& d) {
  ModelConfig cfg = desk_config();
  auto geti = [&](const char* k, int def) {
    return d.contains(k) ? d[k].cast<int>() : def;
  };
  cfg.mel_bins = geti("mel_bins", cfg.mel_bins);
  cfg.frames = geti("frames", cfg.frames);
  cfg.patch_t = geti("patch_t", cfg.patch_t);
  cfg.patch_f = geti("patch_f", cfg.patch_f);
  cfg.num_classes = geti("num_classes", cfg.num_classes);
  if (d.contains("rpe")) cfg.rpe_enabled = d["rpe"].cast<bool>();
  if (d.contains("depths")) {
    auto depths = d["depths"].cast<std::vector<int>>();
    auto dims = d["dims"].cast<std::vector<int>>();
    auto heads = d["heads"].cast<std::vector<int>>();
    auto qs = d["q_strides"].cast<std::vector<std::pair<int, int>>>();
    auto kvs = d["kv_strides"].cast<std::vector<std::pair<int, int>>>();
    if (dims.size() != depths.size() || heads.size() != depths.size() ||
        qs.size() != depths.size() || kvs.size() != depths.size()) {
      throw ConfigError("stage lists must have equal length");
    }
    cfg.stages.clear();
    for (size_t i = 0; i < depths.size(); ++i) {
      StageConfig s;
      s.depth = depths[i];
      s.dim = dims[i];
      s.heads = heads[i];
      s.pool_q_stride_t = qs[i].first;
      s.pool_q_stride_f = qs[i].second;
      s.pool_kv_stride_t = kvs[i].first;
      s.pool_kv_stride_f = kvs[i].second;
      cfg.stages.push_back(s);
    }
    cfg.stem_dim = cfg.stages.front().dim;
  }
  validate_config(cfg);
  return cfg;
}

py::dict config_to_dict(const ModelConfig& cfg) {
  py::dict d;
  d["mel_bins"] = cfg.mel_bins;
  d["frames"] = cfg.frames;
  d["patch_t"] = cfg.patch_t;
  d["patch_f"] = cfg.patch_f;
  d["num_classes"] = cfg.num_classes;
  d["rpe"] = cfg.rpe_enabled;
  std::vector<int> depths, dims, heads;
  std::vector<std::pair<int, int>> qs, kvs;
  for (const auto& s : cfg.stages) {
    depths.push_back(s.depth);
    dims.push_back(s.dim);
    heads.push_back(s.heads);
    qs.emplace_back(s.pool_q_stride_t, s.pool_q_stride_f);
    kvs.emplace_back(s.pool_kv_stride_t, s.pool_kv_stride_f);
  }
  d["depths"] = depths;
  d["dims"] = dims;
  d["heads"] = heads;
  d["q_strides"] = qs;
  d["kv_strides"] = kvs;
  return d;
}

py::list plan_to_list(const ShapePlan& plan) {
  py::list stages;
  for (size_t i = 0; i < plan.stages.size(); ++i) {
    const auto& st = plan.stages[i];
    py::dict e;
    e["stage"] = i;
    e["tokens"] = st.tokens;
    e["grid"] = py::make_tuple(st.grid_t, st.grid_f);
    e["dim"] = st.dim;
    py::list blocks;
    for (const auto& b : st.blocks) {
      blocks.append(py::make_tuple(b.lq, b.lkv));
    }
    e["attention_shapes"] = blocks;
    stages.append(e);
  }
  return stages;
}

// Owns the encoder tree; exposes the forward operations the CLI trains.
class PyModel {
 public:
  PyModel(const py::object& config, uint64_t seed) {
    cfg_ = config.is_none() ? desk_config()
                            : config_from_dict(config.cast<py::dict>());
    params_ = init_weights<float>(cfg_, seed);
    params_.set_requires_grad(false);
  }

  py::array forward(const Arr& spec) {
    Spectrogram s = spec_from(spec);
    auto tokens = embed_spectrogram(cfg_, params_, s);
    auto logits = classify(cfg_, params_, forward_features(cfg_, params_, tokens));
    return to_numpy(logits);
  }

  py::array features(const Arr& spec) {
    Spectrogram s = spec_from(spec);
    auto tokens = embed_spectrogram(cfg_, params_, s);
    auto f = forward_features(cfg_, params_, tokens);
    return to_numpy(mean_pool_rows(f.tokens));
  }

  py::list plan() const { return plan_to_list(shape_plan(cfg_)); }
  py::dict config() const { return config_to_dict(cfg_); }

  void save(const std::string& path) const { save_params(path, params_); }
  void load(const std::string& path) {
    std::string prefix;
    for (const auto& e : read_checkpoint(path)) {
      if (e.name.rfind("student/", 0) == 0) {
        prefix = "student/";
        break;
      }
    }
    load_params(path, params_, prefix, /*allow_extra=*/true);
  }

 private:
  ModelConfig cfg_;
  Params params_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multiscale audio spectrogram transformer core operations";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);

  m.def("pooled_len", &pooled_len, py::arg("len"), py::arg("kernel"),
        py::arg("stride"), py::arg("pad"));

  m.def("shape_plan", [](const py::dict& cfg) {
    return plan_to_list(shape_plan(config_from_dict(cfg)));
  });
  m.def("desk_config", [] { return config_to_dict(desk_config()); });

  m.def(
      "log_mel",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>&
             samples,
         int sample_rate, int mel_bins) {
        Waveform w;
        w.sample_rate = sample_rate;
        w.samples.assign(samples.data(), samples.data() + samples.size());
        MelConfig mc;
        mc.mel_bins = mel_bins;
        return spec_to_numpy(log_mel(w, mc));
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("mel_bins") = 64);

  m.def(
      "mixup",
      [](const Arr& a, const Arr& b, float lam) {
        return spec_to_numpy(mixup(spec_from(a), spec_from(b), lam));
      },
      py::arg("a"), py::arg("b"), py::arg("lam"));

  m.def(
      "patch_drop_keep",
      [](int n, double j, uint64_t seed) {
        Rng rng(seed);
        PatchGridT<float> g;
        g.grid_t = n;
        g.grid_f = 1;
        g.kept = full_kept(n);
        g.tokens = Tensor::zeros({n, 1});
        auto dropped = patch_drop(g, j, rng);
        py::array_t<int> out(static_cast<py::ssize_t>(dropped.kept.size()));
        std::copy(dropped.kept.begin(), dropped.kept.end(),
                  out.mutable_data());
        return out;
      },
      py::arg("n"), py::arg("j"), py::arg("seed"),
      "Surviving indices after dropping round(j*n) of n patches");

  m.def(
      "info_nce",
      [](const Arr& za, const Arr& zo, double tau) {
        return info_nce(tensor_from(za), tensor_from(zo), tau).item();
      },
      py::arg("z_anchor"), py::arg("z_other"), py::arg("tau"));
  m.def(
      "symmetric_loss",
      [](const Arr& za, const Arr& zo, double tau) {
        return symmetric_loss(tensor_from(za), tensor_from(zo), tau).item();
      },
      py::arg("f_out"), py::arg("h_out"), py::arg("tau"));

  m.def(
      "gen_synthetic",
      [](int n, uint64_t seed, float sigma) {
        SynthSpec spec;
        spec.seed = seed;
        spec.noise_sigma = sigma;
        auto samples = gen_synthetic(spec, n);
        py::array_t<float> specs(
            {static_cast<py::ssize_t>(n),
             static_cast<py::ssize_t>(spec.duration_frames),
             static_cast<py::ssize_t>(spec.mel_bins)});
        py::array_t<int> labels(static_cast<py::ssize_t>(n));
        float* sp = specs.mutable_data();
        for (int i = 0; i < n; ++i) {
          std::copy(samples[i].spec.frames.begin(),
                    samples[i].spec.frames.end(),
                    sp + static_cast<size_t>(i) * spec.duration_frames *
                             spec.mel_bins);
          labels.mutable_data()[i] = samples[i].label;
        }
        return py::make_tuple(specs, labels);
      },
      py::arg("n"), py::arg("seed") = 0, py::arg("sigma") = 0.3f);

  m.def("matmul", [](const Arr& a, const Arr& b) {
    return to_numpy(matmul(tensor_from(a), tensor_from(b)));
  });
  m.def("softmax_lastdim", [](const Arr& x) {
    return to_numpy(softmax_lastdim(tensor_from(x)));
  });
  m.def("gelu",
        [](const Arr& x) { return to_numpy(gelu(tensor_from(x))); });
  m.def(
      "layer_norm",
      [](const Arr& x, const Arr& g, const Arr& b, double eps) {
        return to_numpy(
            layer_norm(tensor_from(x), tensor_from(g), tensor_from(b), eps));
      },
      py::arg("x"), py::arg("gamma"), py::arg("beta"), py::arg("eps") = 1e-5);
  m.def(
      "conv2d_grid",
      [](const Arr& x, const Arr& k, int st, int sf, int pt, int pf) {
        return to_numpy(
            conv2d_grid(tensor_from(x), tensor_from(k), st, sf, pt, pf));
      },
      py::arg("x"), py::arg("kernel"), py::arg("stride_t"),
      py::arg("stride_f"), py::arg("pad_t"), py::arg("pad_f"));

  py::class_<PyModel>(m, "Model")
      .def(py::init<const py::object&, uint64_t>(),
           py::arg("config") = py::none(), py::arg("seed") = 0)
      .def("forward", &PyModel::forward, py::arg("spectrogram"))
      .def("features", &PyModel::features, py::arg("spectrogram"))
      .def("shape_plan", &PyModel::plan)
      .def("config", &PyModel::config)
      .def("save", &PyModel::save, py::arg("path"))
      .def("load", &PyModel::load, py::arg("path"));
}
