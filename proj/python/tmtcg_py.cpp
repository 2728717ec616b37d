// Python bindings: stage functions over files and strings, plus a few pure helpers.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <memory>
#include <string>

#include "tmtcg/executor.hpp"
#include "tmtcg/harness/mock_server.hpp"
#include "tmtcg/kv_config.hpp"
#include "tmtcg/mqtt/codec.hpp"
#include "tmtcg/mqtt/topic.hpp"
#include "tmtcg/pipeline.hpp"
#include "tmtcg/suite_io.hpp"
#include "tmtcg/threat_xml.hpp"

namespace py = pybind11;
using namespace tmtcg;

namespace {

using Entries = std::map<std::string, std::string>;

pipeline::PipelineConfig make_config(const Entries& entries, const std::string& base_dir) {
    return pipeline::PipelineConfig::from_entries(entries, base_dir);
}

py::dict summary_dict(const exec::Summary& s) {
    py::dict d;
    d["pass"] = s.pass;
    d["fail"] = s.fail;
    d["inconclusive"] = s.inconclusive;
    d["env_warnings"] = s.env_warnings;
    return d;
}

py::list threats_list(const std::string& xml) {
    py::list out;
    for (const auto& s : import_threats(xml)) {
        py::dict d;
        d["threat_id"] = s.threat.threat_id;
        d["template_id"] = s.threat.template_id;
        d["element_id"] = s.threat.element_id;
        d["category"] = std::string(threat::to_string(s.threat.category));
        d["title"] = s.threat.title;
        d["likelihood"] = s.likelihood;
        d["impact"] = s.impact;
        d["score"] = s.score;
        d["selected"] = s.selected;
        out.append(d);
    }
    return out;
}

std::string generate(const std::string& threats_xml, const Entries& entries, const std::string& base_dir) {
    const auto cfg = make_config(entries, base_dir);
    return gen::write_suite(pipeline::generate(threats_xml, cfg.templates_path, cfg));
}

std::string execute(const std::string& suite_json, const Entries& entries, const std::string& base_dir) {
    const auto cfg = make_config(entries, base_dir);
    const auto suite = gen::read_suite(suite_json);
    exec::ExecutionReport report;
    {
        py::gil_scoped_release release;
        report = exec::run_suite(suite, cfg.make_target());
    }
    return exec::write_report(report);
}

py::dict report_info(const std::string& report_json) {
    const auto r = exec::read_report(report_json);
    py::dict d;
    d["suite_id"] = r.suite_id;
    d["summary"] = summary_dict(r.summary);
    d["exit_code"] = exec::exit_code(r);
    d["environment_matches"] = r.environment_matches();
    py::list timeline;
    for (const auto& t : r.timeline) {
        timeline.append(py::make_tuple(t.case_id, t.probe.label, t.probe.at_ms, t.probe.alive));
    }
    d["timeline"] = timeline;
    return d;
}

py::list diff(const std::string& before_json, const std::string& after_json) {
    py::list out;
    for (const auto& c : exec::diff_reports(exec::read_report(before_json), exec::read_report(after_json))) {
        py::list steps;
        for (const auto& s : c.steps) {
            steps.append(py::make_tuple(s.index, s.action, std::string(exec::to_string(s.before)),
                                        std::string(exec::to_string(s.after))));
        }
        py::dict d;
        d["case_id"] = c.case_id;
        d["steps"] = steps;
        d["missing_before"] = c.missing_before;
        d["missing_after"] = c.missing_after;
        out.append(d);
    }
    return out;
}

py::dict run_pipeline(const std::string& config_path, const Entries& overrides) {
    const auto cfg = pipeline::PipelineConfig::load(config_path, overrides, ".");
    pipeline::PipelineResult result;
    {
        py::gil_scoped_release release;
        result = pipeline::run(cfg);
    }
    py::dict d;
    d["threats_path"] = result.threats_path;
    d["suite_path"] = result.suite_path;
    d["report_path"] = result.report_path;
    d["summary"] = summary_dict(result.report.summary);
    d["exit_code"] = result.exit_code;
    return d;
}

/// Mock broker on a local TCP port for the lifetime of the object.
class PyMockServer {
public:
    PyMockServer(const Entries& broker_entries, const std::string& host, std::uint16_t port) {
        const auto cfg = make_config(broker_entries, ".");
        broker_ = std::make_shared<harness::MockBroker>(cfg.broker, std::make_shared<harness::SteadyClock>());
        server_ = std::make_unique<harness::MockServer>(broker_, host, port);
    }
    std::uint16_t port() const { return server_->port(); }
    void stop() {
        py::gil_scoped_release release;
        server_->stop();
    }

private:
    std::shared_ptr<harness::MockBroker> broker_;
    std::unique_ptr<harness::MockServer> server_;
};

}  // namespace

PYBIND11_MODULE(_tmtcg, m) {
    m.doc() = "Threat-model driven test generation for MQTT brokers";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<pipeline::StageError>(m, "StageError", PyExc_RuntimeError);
    py::register_exception<exec::SutDownError>(m, "SutDownError", PyExc_RuntimeError);
    py::register_exception<exec::UsageError>(m, "UsageError", PyExc_ValueError);

    m.def("derive", &pipeline::derive, py::arg("dfd_path"), py::arg("templates_path"), py::arg("matrix_path") = "",
          "Derive and score threats; returns the threat XML.");
    m.def("import_threats", &threats_list, py::arg("xml"), "Threat XML as a list of dicts.");
    m.def("generate", &generate, py::arg("threats_xml"), py::arg("config"), py::arg("base_dir") = ".",
          "Generate a suite from threat XML and config entries; returns the suite JSON.");
    m.def("execute", &execute, py::arg("suite_json"), py::arg("config"), py::arg("base_dir") = ".",
          "Replay a suite against the configured target; returns the report JSON.");
    m.def("report_info", &report_info, py::arg("report_json"), "Summary, exit code and liveness timeline.");
    m.def("diff", &diff, py::arg("before_json"), py::arg("after_json"), "Steps whose outcome differs, per case.");
    m.def("run_pipeline", &run_pipeline, py::arg("config_path"), py::arg("overrides") = Entries{},
          "derive, generate and execute; returns artifact paths and the summary.");

    m.def("topic_matches", [](const std::string& f, const std::string& t) { return mqtt::topic_matches(f, t); },
          py::arg("filter"), py::arg("topic"));
    m.def(
        "encode_remaining_length",
        [](std::uint32_t v) {
            Bytes out;
            mqtt::append_remaining_length(v, out);
            return py::bytes(reinterpret_cast<const char*>(out.data()), out.size());
        },
        py::arg("value"));

    py::class_<PyMockServer>(m, "MockServer")
        .def(py::init<const Entries&, const std::string&, std::uint16_t>(), py::arg("config") = Entries{},
             py::arg("host") = "127.0.0.1", py::arg("port") = 0)
        .def_property_readonly("port", &PyMockServer::port)
        .def("stop", &PyMockServer::stop);
}
