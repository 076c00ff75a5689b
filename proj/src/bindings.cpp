#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "latticecrf/crf.hpp"
#include "latticecrf/data_io.hpp"
#include "latticecrf/image_io.hpp"
#include "latticecrf/learning.hpp"
#include "latticecrf/lattice.hpp"
#include "latticecrf/metrics.hpp"

namespace py = pybind11;
namespace lc = latticecrf;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int32_t, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

lc::FeatureMatrix features_from(const DoubleArray& arr) {
  if (arr.ndim() != 2) throw std::invalid_argument("features must be a 2-d array");
  lc::FeatureMatrix f(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
  std::copy(arr.data(), arr.data() + arr.size(), f.values.begin());
  return f;
}

lc::Matrix matrix_from(const DoubleArray& arr) {
  if (arr.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  lc::Matrix m(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
  std::copy(arr.data(), arr.data() + arr.size(), m.data());
  return m;
}

py::array_t<double> to_numpy(const lc::Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data(), m.data() + m.size(), out.mutable_data());
  return out;
}

py::array_t<double> to_numpy_3d(const lc::Matrix& m, int h, int w) {
  py::array_t<double> out({h, w, m.cols()});
  std::copy(m.data(), m.data() + m.size(), out.mutable_data());
  return out;
}

lc::KernelSpec kernel_from_stddevs(const std::vector<double>& stddevs, double weight) {
  return lc::KernelSpec::from_stddevs(stddevs, weight);
}

lc::UnaryField unary_from(const DoubleArray& arr) {
  if (arr.ndim() != 3) throw std::invalid_argument("unary must be a (height, width, labels) array");
  lc::UnaryField u(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)),
                   static_cast<int>(arr.shape(2)));
  std::copy(arr.data(), arr.data() + arr.size(), u.costs.data());
  u.validate();
  return u;
}

lc::Image image_from(const ByteArray& arr) {
  if (arr.ndim() != 3 || arr.shape(2) != 3)
    throw std::invalid_argument("image must be a (height, width, 3) uint8 array");
  lc::Image img(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)));
  std::copy(arr.data(), arr.data() + arr.size(), img.pixels.begin());
  return img;
}

lc::CompatibilityMatrix compat_from(const py::object& obj, int num_labels) {
  if (py::isinstance<py::str>(obj)) {
    std::string s = obj.cast<std::string>();
    if (s == "potts") return lc::CompatibilityMatrix::potts(num_labels);
    throw std::invalid_argument("compatibility must be 'potts' or an (L, L) array");
  }
  lc::CompatibilityMatrix c;
  c.mu = matrix_from(obj.cast<DoubleArray>());
  c.validate();
  if (c.num_labels() != num_labels)
    throw std::invalid_argument("compatibility size does not match label count");
  return c;
}

lc::FilterBackend backend_from(const std::string& name) {
  if (name == "lattice") return lc::FilterBackend::kLattice;
  if (name == "brute") return lc::FilterBackend::kBruteForce;
  throw std::invalid_argument("backend must be 'lattice' or 'brute'");
}

lc::LabelMap labelmap_from(const IntArray& arr) {
  if (arr.ndim() != 2) throw std::invalid_argument("labels must be a 2-d int32 array");
  lc::LabelMap map(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)));
  std::copy(arr.data(), arr.data() + arr.size(), map.labels.begin());
  return map;
}

py::array_t<int32_t> labels_to_numpy(const std::vector<int32_t>& labels, int h, int w) {
  py::array_t<int32_t> out({h, w});
  std::copy(labels.begin(), labels.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_latticecrf, m) {
  m.doc() = "Dense CRF inference with permutohedral-lattice Gaussian filtering";

  py::class_<lc::PermutohedralLattice>(m, "PermutohedralLattice")
      .def(py::init([](const DoubleArray& pts) {
             return lc::PermutohedralLattice(features_from(pts));
           }),
           py::arg("whitened_points"))
      .def_property_readonly("num_points", &lc::PermutohedralLattice::num_points)
      .def_property_readonly("dim", &lc::PermutohedralLattice::dim)
      .def_property_readonly("num_vertices", &lc::PermutohedralLattice::num_vertices)
      .def(
          "filter",
          [](const lc::PermutohedralLattice& lat, const DoubleArray& values, bool normalize) {
            return to_numpy(lat.filter(matrix_from(values), normalize));
          },
          py::arg("values"), py::arg("normalize") = true)
      .def_property_readonly("normalization", [](const lc::PermutohedralLattice& lat) {
        py::array_t<double> out(static_cast<py::ssize_t>(lat.normalization().size()));
        std::copy(lat.normalization().begin(), lat.normalization().end(), out.mutable_data());
        return out;
      });

  m.def(
      "whiten_features",
      [](const DoubleArray& pts, const std::vector<double>& stddevs) {
        lc::FeatureMatrix w = lc::whiten_features(features_from(pts), kernel_from_stddevs(stddevs, 1.0));
        lc::Matrix m2(w.n_points, w.dim);
        std::copy(w.values.begin(), w.values.end(), m2.data());
        return to_numpy(m2);
      },
      py::arg("points"), py::arg("stddevs"));

  m.def(
      "brute_force_filter",
      [](const DoubleArray& pts, const std::vector<double>& stddevs, const DoubleArray& values,
         bool normalize) {
        return to_numpy(lc::brute_force_filter(features_from(pts),
                                               kernel_from_stddevs(stddevs, 1.0),
                                               matrix_from(values), normalize));
      },
      py::arg("points"), py::arg("stddevs"), py::arg("values"), py::arg("normalize") = true);

  py::class_<lc::DenseCRFModel>(m, "DenseCRF")
      .def(py::init([](const DoubleArray& unary, const py::object& compat) {
             lc::UnaryField u = unary_from(unary);
             return lc::DenseCRFModel(u, compat_from(compat, u.num_labels));
           }),
           py::arg("unary"), py::arg("compatibility") = py::str("potts"))
      .def_property_readonly("num_pixels", &lc::DenseCRFModel::num_pixels)
      .def_property_readonly("num_labels", &lc::DenseCRFModel::num_labels)
      .def_property("normalize_messages", &lc::DenseCRFModel::normalize_messages,
                    &lc::DenseCRFModel::set_normalize_messages)
      .def_property_readonly("compatibility",
                             [](const lc::DenseCRFModel& m2) { return to_numpy(m2.compatibility().mu); })
      .def("set_compatibility",
           [](lc::DenseCRFModel& m2, const py::object& compat) {
             m2.set_compatibility(compat_from(compat, m2.num_labels()));
           })
      .def(
          "add_kernel",
          [](lc::DenseCRFModel& m2, const DoubleArray& features, double weight) {
            lc::FeatureMatrix f = features_from(features);
            lc::KernelSpec spec;
            spec.inv_stddevs.assign(f.dim, 1.0);
            spec.weight = weight;
            m2.add_kernel(spec, std::move(f));
          },
          py::arg("features"), py::arg("weight") = 1.0,
          "Add a Gaussian kernel over pre-scaled features")
      .def(
          "add_appearance_kernel",
          [](lc::DenseCRFModel& m2, const ByteArray& image, double weight, double theta_alpha,
             double theta_beta) {
            lc::Image img = image_from(image);
            if (img.num_pixels() != m2.num_pixels())
              throw std::invalid_argument("image size does not match unary");
            lc::KernelSpec spec;
            spec.inv_stddevs.assign(5, 1.0);
            spec.weight = weight;
            m2.add_kernel(spec, lc::build_appearance_features(img, theta_alpha, theta_beta));
          },
          py::arg("image"), py::arg("weight"), py::arg("theta_alpha"), py::arg("theta_beta"))
      .def(
          "add_smoothness_kernel",
          [](lc::DenseCRFModel& m2, double weight, double theta_gamma) {
            lc::KernelSpec spec;
            spec.inv_stddevs.assign(2, 1.0);
            spec.weight = weight;
            m2.add_kernel(spec, lc::build_smoothness_features(m2.unary().width,
                                                              m2.unary().height, theta_gamma));
          },
          py::arg("weight"), py::arg("theta_gamma"))
      .def(
          "run",
          [](const lc::DenseCRFModel& m2, int iterations, const std::string& backend,
             bool return_kl) -> py::object {
            std::vector<double> trace;
            lc::Matrix q = lc::run_inference(m2, iterations, backend_from(backend),
                                             return_kl ? &trace : nullptr);
            py::array_t<double> qa = to_numpy_3d(q, m2.unary().height, m2.unary().width);
            if (!return_kl) return std::move(qa);
            return py::make_tuple(std::move(qa), trace);
          },
          py::arg("iterations") = 10, py::arg("backend") = "lattice",
          py::arg("return_kl") = false)
      .def(
          "kl_estimate",
          [](const lc::DenseCRFModel& m2, const DoubleArray& q, const std::string& backend) {
            if (q.size() != static_cast<py::ssize_t>(m2.num_pixels()) * m2.num_labels())
              throw std::invalid_argument("marginal size does not match the model");
            lc::Matrix qm(m2.num_pixels(), m2.num_labels());
            std::copy(q.data(), q.data() + q.size(), qm.data());
            return lc::kl_divergence_estimate(m2, qm, backend_from(backend));
          },
          py::arg("q"), py::arg("backend") = "lattice")
      .def("energy", [](const lc::DenseCRFModel& m2, const IntArray& labels) {
        lc::LabelMap map = labelmap_from(labels);
        std::vector<int32_t> l(map.labels.begin(), map.labels.end());
        return lc::gibbs_energy(m2, l);
      });

  m.def(
      "map_labeling",
      [](const DoubleArray& q) {
        if (q.ndim() != 3) throw std::invalid_argument("marginals must be (height, width, labels)");
        int h = static_cast<int>(q.shape(0));
        int w = static_cast<int>(q.shape(1));
        lc::Matrix m2(h * w, static_cast<int>(q.shape(2)));
        std::copy(q.data(), q.data() + q.size(), m2.data());
        return labels_to_numpy(lc::map_labeling(m2), h, w);
      },
      py::arg("marginals"));

  // metrics
  m.def("global_accuracy", [](const IntArray& pred, const IntArray& gt) {
    return lc::global_accuracy(labelmap_from(pred), labelmap_from(gt));
  });
  m.def("average_accuracy", [](const IntArray& pred, const IntArray& gt, int num_labels) {
    return lc::average_accuracy(labelmap_from(pred), labelmap_from(gt), num_labels);
  });
  m.def("trimap_error", [](const IntArray& pred, const IntArray& gt, int width) {
    lc::TrimapResult r = lc::trimap_error(labelmap_from(pred), labelmap_from(gt), width);
    return py::make_tuple(r.band_pixels, r.errors, r.error_percent);
  });
  m.def("voc_iou", [](const IntArray& pred, const IntArray& gt, int num_labels) {
    lc::IouResult r = lc::voc_iou(labelmap_from(pred), labelmap_from(gt), num_labels);
    std::vector<bool> valid(r.has_union.begin(), r.has_union.end());
    return py::make_tuple(r.per_class, valid, r.mean_iou);
  });

  // io
  m.def("load_image", [](const std::string& path) {
    lc::Image img = lc::load_image(path);
    py::array_t<uint8_t> out({img.height, img.width, 3});
    std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
    return out;
  });
  m.def("save_ppm", [](const ByteArray& image, const std::string& path) {
    lc::save_ppm(image_from(image), path);
  });
  m.def("load_unary", [](const std::string& path) {
    lc::UnaryField u = lc::load_unary(path);
    return to_numpy_3d(u.costs, u.height, u.width);
  });
  m.def("save_unary", [](const DoubleArray& unary, const std::string& path) {
    lc::save_unary(unary_from(unary), path);
  });
  m.def(
      "load_labelmap",
      [](const std::string& path) {
        lc::LabelMap map = lc::load_labelmap(path);
        return labels_to_numpy(
            std::vector<int32_t>(map.labels.begin(), map.labels.end()), map.height, map.width);
      },
      py::arg("path"));
  m.def(
      "save_labelmap",
      [](const IntArray& labels, const std::string& path, int num_labels) {
        lc::LabelMap map = labelmap_from(labels);
        if (num_labels <= 0) {
          for (int32_t l : map.labels) num_labels = std::max(num_labels, l + 1);
          num_labels = std::max(num_labels, 1);
        }
        lc::save_labelmap(map, lc::Palette::standard(num_labels), path);
      },
      py::arg("labels"), py::arg("path"), py::arg("num_labels") = 0);
  m.def("load_compatibility", [](const std::string& path) {
    return to_numpy(lc::load_compatibility(path).mu);
  });
  m.def("save_compatibility", [](const DoubleArray& mu, const std::string& path) {
    lc::CompatibilityMatrix c;
    c.mu = matrix_from(mu);
    lc::save_compatibility(c, path);
  });
}
