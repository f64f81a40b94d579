// Copyright 2026 The Gauntlet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Python bindings: bundle lint, chunk planning and merging, timestamps, an
// in-process server and an HTTP client. JSON crosses as Python objects.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gauntlet/bundle.hpp"
#include "gauntlet/client.hpp"
#include "gauntlet/clock.hpp"
#include "gauntlet/error.hpp"
#include "gauntlet/evaluator.hpp"
#include "gauntlet/http_api.hpp"
#include "gauntlet/platform.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace gauntlet {
namespace {

py::object to_py(const json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

json from_py(const py::handle& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict violations_dict(const Bundle& b) {
  py::list v, n;
  for (const auto& x : validate_bundle(b)) v.append(py::make_tuple(x.path, x.message));
  for (const auto& x : config_notices(b.config)) n.append(py::make_tuple(x.path, x.message));
  py::dict out;
  out["challenge_id"] = b.config.id;
  out["valid"] = v.empty();
  out["violations"] = v;
  out["notices"] = n;
  return out;
}

// A platform plus its REST server, owned together.
class Server {
 public:
  Server(const std::string& data_dir, const std::string& host, int port,
         const std::string& admin_token, bool local_workers, std::int64_t parallelism) {
    PlatformOptions o;
    o.data_dir = data_dir;
    o.admin_token = admin_token;
    o.start_local_workers = local_workers;
    o.worker.parallelism = parallelism;
    platform_ = std::make_unique<Platform>(clock_, o);
    server_ = std::make_unique<ApiServer>(*platform_, ApiServerOptions{host, port});
  }
  ~Server() { stop(); }

  std::string start() {
    server_->start();
    return server_->base_url();
  }
  void stop() {
    if (server_) server_->stop();
  }
  std::string base_url() const { return server_->base_url(); }
  const std::string& admin_token() const { return platform_->admin_token(); }
  std::string create_team(const std::string& name) { return platform_->create_team(name).second; }

 private:
  SystemClock clock_;
  std::unique_ptr<Platform> platform_;
  std::unique_ptr<ApiServer> server_;
};

}  // namespace
}  // namespace gauntlet

PYBIND11_MODULE(_gauntlet, m) {
  using namespace gauntlet;
  m.doc() = "Native core of the gauntlet challenge platform.";

  static py::handle error_type =
      PyErr_NewException("gauntlet._gauntlet.GauntletError", PyExc_RuntimeError, nullptr);
  static py::handle transport_type =
      PyErr_NewException("gauntlet._gauntlet.TransportError", PyExc_ConnectionError, nullptr);
  m.attr("GauntletError") = error_type;
  m.attr("TransportError") = transport_type;
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type)(std::string(e.what()));
      inst.attr("code") = std::string(code_name(e.code()));
      inst.attr("details") = to_py(e.details());
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    } catch (const TransportError& e) {
      PyErr_SetString(transport_type.ptr(), e.what());
    }
  });

  m.def("error_codes", [] {
    std::vector<std::string> out;
    for (int i = 0;; ++i) {
      const auto name = code_name(static_cast<ErrorCode>(i));
      if (!code_from_name(name) || static_cast<int>(*code_from_name(name)) != i) break;
      out.emplace_back(name);
    }
    return out;
  });
  m.def(
      "http_status",
      [](const std::string& name) {
        const auto code = code_from_name(name);
        if (!code) throw py::value_error("unknown error code '" + name + "'");
        return http_status(*code);
      },
      py::arg("code"));

  m.def(
      "format_timestamp",
      [](long long ms) { return format_timestamp(Timestamp(std::chrono::milliseconds(ms))); },
      py::arg("epoch_ms"));
  m.def(
      "parse_timestamp",
      [](const std::string& text) -> std::optional<long long> {
        const auto t = parse_timestamp(text);
        if (!t) return std::nullopt;
        return std::chrono::duration_cast<std::chrono::milliseconds>(t->time_since_epoch()).count();
      },
      py::arg("text"));

  m.def(
      "lint",
      [](const py::bytes& archive) {
        const std::string bytes = archive;
        return violations_dict(read_bundle(bytes));
      },
      py::arg("archive"), "Reads a zipped bundle and reports every violation and notice.");

  m.def(
      "plan_chunks",
      [](std::int64_t items, std::int64_t parallelism) {
        std::vector<std::pair<std::int64_t, std::int64_t>> out;
        for (const auto& c : plan_chunks(items, parallelism)) out.emplace_back(c.begin, c.end);
        return out;
      },
      py::arg("item_count"), py::arg("parallelism"));
  m.def(
      "merge_results",
      [](const py::list& parts, const std::vector<std::string>& schema) {
        std::vector<MetricResult> rs;
        for (const auto& p : parts) rs.push_back(metric_result_from_json(from_py(p)));
        return to_py(to_json(merge_results(rs, schema)));
      },
      py::arg("parts"), py::arg("schema"));

  py::class_<Server>(m, "Server")
      .def(py::init<const std::string&, const std::string&, int, const std::string&, bool,
                    std::int64_t>(),
           py::arg("data_dir"), py::arg("host") = "127.0.0.1", py::arg("port") = 0,
           py::arg("admin_token") = "", py::arg("local_workers") = true,
           py::arg("parallelism") = 1)
      .def("start", &Server::start, py::call_guard<py::gil_scoped_release>())
      .def("stop", &Server::stop, py::call_guard<py::gil_scoped_release>())
      .def_property_readonly("base_url", &Server::base_url)
      .def_property_readonly("admin_token", &Server::admin_token)
      .def("create_team", &Server::create_team, py::arg("name"));

  py::class_<ApiClient>(m, "Client")
      .def(py::init<std::string, std::string>(), py::arg("base_url"), py::arg("token") = "")
      .def_property_readonly("base_url", &ApiClient::base_url)
      .def("get",
           [](const ApiClient& c, const std::string& path) {
             json out;
             {
               py::gil_scoped_release release;
               out = c.get(path);
             }
             return to_py(out);
           },
           py::arg("path"))
      .def("post",
           [](const ApiClient& c, const std::string& path, const py::object& body) {
             const json b = body.is_none() ? json::object() : from_py(body);
             json out;
             {
               py::gil_scoped_release release;
               out = c.post(path, b);
             }
             return to_py(out);
           },
           py::arg("path"), py::arg("body") = py::none())
      .def("post_bytes",
           [](const ApiClient& c, const std::string& path, const py::bytes& data,
              const std::string& content_type) {
             const std::string bytes = data;
             json out;
             {
               py::gil_scoped_release release;
               out = c.post_bytes(path, bytes, content_type);
             }
             return to_py(out);
           },
           py::arg("path"), py::arg("data"), py::arg("content_type") = "application/octet-stream")
      .def("get_bytes", [](const ApiClient& c, const std::string& path) {
        std::string out;
        {
          py::gil_scoped_release release;
          out = c.get_bytes(path);
        }
        return py::bytes(out);
      });
}
