// Python bindings for the core operations: closed-form math, the sprite
// environment, and inference on saved models.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <vector>

#include "vai/attention/cde.hpp"
#include "vai/core/rng.hpp"
#include "vai/core/tensor.hpp"
#include "vai/envs/drawer.hpp"
#include "vai/envs/spriteworld.hpp"
#include "vai/invariance/adapter.hpp"
#include "vai/keypoint/transporter.hpp"
#include "vai/policy/sac.hpp"

namespace py = pybind11;
using namespace vai;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor tensor_from_array(const FloatArray& a) {
  std::vector<int> shape;
  for (py::ssize_t d = 0; d < a.ndim(); ++d)
    shape.push_back(static_cast<int>(a.shape(d)));
  Tensor t(shape);
  const float* src = a.data();
  std::copy(src, src + t.numel(), t.v.begin());
  return t;
}

py::array_t<float> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
  py::array_t<float> out(shape);
  std::copy(t.v.begin(), t.v.end(), out.mutable_data());
  return out;
}

envs::Vec3 vec3_from_seq(const std::vector<double>& v, const char* name) {
  if (v.size() != 3)
    throw py::value_error(std::string(name) + " must have exactly 3 components");
  return {v[0], v[1], v[2]};
}

// Stateful wrapper over the pure-function environment API.
class PySpriteWorld {
 public:
  PySpriteWorld(int size, int episode_len, const std::string& texture) {
    envs::SpriteWorldConfig cfg;
    cfg.size = size;
    cfg.episode_len = episode_len;
    cfg.texture = texture;
    env_ = std::make_unique<envs::SpriteWorld>(cfg);
  }

  py::array_t<float> reset(std::uint64_t seed) {
    auto [state, frame] = env_->reset(seed);
    state_ = state;
    started_ = true;
    return array_from_tensor(frame);
  }

  py::tuple step(const std::vector<float>& action) {
    require_started();
    if (action.size() != 2) throw py::value_error("action must have 2 components");
    auto res = env_->step(state_, envs::Action{action[0], action[1]});
    state_ = res.state;
    return py::make_tuple(array_from_tensor(res.frame), res.reward, res.done);
  }

  py::array_t<float> render() {
    require_started();
    return array_from_tensor(env_->render(state_));
  }

  py::array_t<float> ground_truth_mask() {
    require_started();
    return array_from_tensor(env_->ground_truth_mask(state_));
  }

  py::array_t<float> background() { return array_from_tensor(env_->background()); }

  void set_texture(const std::string& name_or_path) { env_->set_texture(name_or_path); }
  std::string texture_id() const { return env_->texture_id(); }

  py::tuple tip_position() {
    require_started();
    auto [x, y] = env_->tip_position(state_);
    return py::make_tuple(x, y);
  }

  double tip_target_distance() {
    require_started();
    return env_->tip_target_distance(state_);
  }

  bool success() {
    require_started();
    return env_->success(state_);
  }

  int size() const { return env_->config().size; }
  int episode_len() const { return env_->config().episode_len; }

 private:
  void require_started() const {
    if (!started_) throw std::logic_error("call reset() before using the environment");
  }

  std::unique_ptr<envs::SpriteWorld> env_;
  envs::SpriteWorldState state_;
  bool started_ = false;
};

class PyTransporter {
 public:
  explicit PyTransporter(const std::string& path)
      : model_(keypoint::load_transporter(path)) {}

  py::array_t<float> detect_keypoints(const FloatArray& frame) {
    return array_from_tensor(keypoint::detect_keypoints(model_, tensor_from_array(frame)));
  }

  py::array_t<float> compute_cde(const FloatArray& frame) {
    return array_from_tensor(attention::compute_cde(model_, tensor_from_array(frame)));
  }

  int input_size() const { return model_.config().input_size; }
  int num_keypoints() const { return model_.config().num_keypoints; }

 private:
  keypoint::TransporterModel model_;
};

class PyAdapter {
 public:
  explicit PyAdapter(const std::string& path) : model_(invariance::load_adapter(path)) {}

  py::array_t<float> predict_mask(const FloatArray& frame) {
    return array_from_tensor(model_.predict_mask(tensor_from_array(frame)));
  }

  py::array_t<float> adapt(const FloatArray& frame) {
    return array_from_tensor(invariance::adapt_observation(model_, tensor_from_array(frame)));
  }

  int input_size() const { return model_.config().input_size; }

 private:
  invariance::AdapterModel model_;
};

class PyPolicy {
 public:
  explicit PyPolicy(const std::string& path) : agent_(policy::load_sac(path)) {}

  std::vector<float> act(const FloatArray& obs) {
    Rng unused = make_rng(0);
    return agent_->act(tensor_from_array(obs), true, unused);
  }

  int obs_size() const { return agent_->config().obs_size; }
  int obs_channels() const { return agent_->config().obs_channels; }

 private:
  std::unique_ptr<policy::SacAgent> agent_;
};

}  // namespace

PYBIND11_MODULE(_vai, m) {
  m.doc() = "core operations: closed-form math, sprite environment, model inference";

  m.def(
      "render_heatmap",
      [](const FloatArray& keypoints, int grid_h, int grid_w, float sigma) {
        return array_from_tensor(
            keypoint::render_heatmap(tensor_from_array(keypoints), grid_h, grid_w, sigma));
      },
      py::arg("keypoints"), py::arg("grid_h"), py::arg("grid_w"), py::arg("sigma"));

  m.def(
      "transport_features",
      [](const FloatArray& feat_s, const FloatArray& feat_t, const FloatArray& heat_s,
         const FloatArray& heat_t) {
        return array_from_tensor(keypoint::transport_features(
            tensor_from_array(feat_s), tensor_from_array(feat_t), tensor_from_array(heat_s),
            tensor_from_array(heat_t)));
      },
      py::arg("feat_s"), py::arg("feat_t"), py::arg("heat_s"), py::arg("heat_t"));

  m.def(
      "reconstruction_loss",
      [](const FloatArray& target, const FloatArray& reconstruction) {
        return keypoint::reconstruction_loss(tensor_from_array(target),
                                             tensor_from_array(reconstruction));
      },
      py::arg("target"), py::arg("reconstruction"));

  m.def(
      "adapter_loss",
      [](const FloatArray& predicted, const FloatArray& target, const FloatArray& feat_noisy,
         const FloatArray& feat_clean, float lam) {
        return invariance::adapter_loss(tensor_from_array(predicted), tensor_from_array(target),
                                        tensor_from_array(feat_noisy),
                                        tensor_from_array(feat_clean), lam);
      },
      py::arg("predicted"), py::arg("target"), py::arg("feat_noisy"), py::arg("feat_clean"),
      py::arg("lam"));

  m.def(
      "threshold_mask",
      [](const FloatArray& cde, float epsilon) {
        return array_from_tensor(attention::threshold_mask(tensor_from_array(cde), epsilon).values);
      },
      py::arg("cde"), py::arg("epsilon"));

  m.def(
      "iou",
      [](const FloatArray& a, const FloatArray& b) {
        return attention::iou(tensor_from_array(a), tensor_from_array(b));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "drawer_reward",
      [](const std::vector<double>& effector, const std::vector<double>& object,
         const std::vector<double>& goal, int exponent_sign, double eps_reach, double c1,
         double c2) {
        envs::DrawerGeometry geom{vec3_from_seq(effector, "effector"),
                                  vec3_from_seq(object, "object"), vec3_from_seq(goal, "goal")};
        envs::DrawerRewardParams params;
        params.eps_reach = eps_reach;
        params.c1 = c1;
        params.c2 = c2;
        return envs::drawer_reward(geom, params, exponent_sign);
      },
      py::arg("effector"), py::arg("object"), py::arg("goal"), py::arg("exponent_sign") = -1,
      py::arg("eps_reach") = 0.08, py::arg("c1") = 1000.0, py::arg("c2") = 0.01);

  m.def(
      "drawer_success",
      [](const std::vector<double>& object, const std::vector<double>& goal,
         double eps_success) {
        return envs::drawer_success(vec3_from_seq(object, "object"),
                                    vec3_from_seq(goal, "goal"), eps_success);
      },
      py::arg("object"), py::arg("goal"), py::arg("eps_success") = 0.08);

  py::class_<PySpriteWorld>(m, "SpriteWorld")
      .def(py::init<int, int, const std::string&>(), py::arg("size") = 84,
           py::arg("episode_len") = 100, py::arg("texture") = "grid")
      .def("reset", &PySpriteWorld::reset, py::arg("seed"))
      .def("step", &PySpriteWorld::step, py::arg("action"))
      .def("render", &PySpriteWorld::render)
      .def("ground_truth_mask", &PySpriteWorld::ground_truth_mask)
      .def("background", &PySpriteWorld::background)
      .def("set_texture", &PySpriteWorld::set_texture, py::arg("name_or_path"))
      .def("texture_id", &PySpriteWorld::texture_id)
      .def("tip_position", &PySpriteWorld::tip_position)
      .def("tip_target_distance", &PySpriteWorld::tip_target_distance)
      .def("success", &PySpriteWorld::success)
      .def_property_readonly("size", &PySpriteWorld::size)
      .def_property_readonly("episode_len", &PySpriteWorld::episode_len);

  py::class_<PyTransporter>(m, "Transporter")
      .def(py::init<const std::string&>(), py::arg("path"))
      .def("detect_keypoints", &PyTransporter::detect_keypoints, py::arg("frame"))
      .def("compute_cde", &PyTransporter::compute_cde, py::arg("frame"))
      .def_property_readonly("input_size", &PyTransporter::input_size)
      .def_property_readonly("num_keypoints", &PyTransporter::num_keypoints);

  py::class_<PyAdapter>(m, "Adapter")
      .def(py::init<const std::string&>(), py::arg("path"))
      .def("predict_mask", &PyAdapter::predict_mask, py::arg("frame"))
      .def("adapt", &PyAdapter::adapt, py::arg("frame"))
      .def_property_readonly("input_size", &PyAdapter::input_size);

  py::class_<PyPolicy>(m, "Policy")
      .def(py::init<const std::string&>(), py::arg("path"))
      .def("act", &PyPolicy::act, py::arg("obs"))
      .def_property_readonly("obs_size", &PyPolicy::obs_size)
      .def_property_readonly("obs_channels", &PyPolicy::obs_channels);
}
