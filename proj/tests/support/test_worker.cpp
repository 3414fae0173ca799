// Bridge worker used by the protocol tests.
//
//   test_worker identity F [task]      echo rows back (F outputs)
//   test_worker linear b1,b2,...[:b0]  regression intercept + b . x
//   test_worker garbage                print a non-JSON hello
//   test_worker silent                 never say hello
//   test_worker die                    hello, then crash on the first request
//   test_worker error-on K ...         error object for request K, else as ...
//   test_worker bad-id | bad-shape     malformed responses to linear 1,1
//   test_worker slow MS ...            sleep before every response
//   test_worker hello F O task         declare anything, answer zeros
//   test_worker replay FILE            play back a golden transcript

#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "preddiff/core.hpp"

namespace {

using nlohmann::json;

void send(const std::string& line) {
  std::cout << line << '\n' << std::flush;
}

std::string hello(const std::string& task, std::size_t f, std::size_t o) {
  return R"({"preddiff_bridge":1,"task":")" + task + R"(","n_features":)" +
         std::to_string(f) + R"(,"n_outputs":)" + std::to_string(o) + "}";
}

std::string rows_text(const std::vector<std::vector<double>>& rows) {
  std::string out = "[";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (r) out += ',';
    out += '[';
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c) out += ',';
      out += preddiff::format_number(rows[r][c]);
    }
    out += ']';
  }
  return out + "]";
}

std::vector<double> numbers(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

int replay(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "cannot open transcript " << path << '\n';
    return 5;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() < 2) continue;
    const std::string body = line.substr(2);
    if (line[0] == 'W') {
      send(body);
    } else if (line[0] == 'C') {
      std::string got;
      if (!std::getline(std::cin, got)) {
        std::cerr << "transcript expected a request but stdin closed\n";
        return 4;
      }
      if (got != body) {
        std::cerr << "transcript mismatch: expected " << body << " got " << got << '\n';
        return 4;
      }
    } else if (line[0] == 'X') {
      std::cerr << body << '\n';
      return 0;
    }
  }
  std::string extra;
  if (std::getline(std::cin, extra)) {
    std::cerr << "unexpected request after transcript end: " << extra << '\n';
    return 4;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) {
    std::cerr << "usage: test_worker MODE ...\n";
    return 2;
  }
  long long error_on = -1;
  int delay_ms = 0;
  bool bad_id = false;
  bool bad_shape = false;
  bool die = false;
  while (!args.empty()) {
    if (args[0] == "error-on" && args.size() >= 2) {
      error_on = std::stoll(args[1]);
      args.erase(args.begin(), args.begin() + 2);
    } else if (args[0] == "slow" && args.size() >= 2) {
      delay_ms = std::stoi(args[1]);
      args.erase(args.begin(), args.begin() + 2);
    } else {
      break;
    }
  }
  if (args.empty()) args = {"linear", "1,1"};
  const std::string mode = args[0];

  if (mode == "replay") return replay(args.at(1));
  if (mode == "garbage") {
    send("hello there, I am not JSON");
    return 0;
  }
  if (mode == "silent") {
    std::this_thread::sleep_for(std::chrono::seconds(30));
    return 0;
  }
  if (mode == "bad-id") bad_id = true;
  if (mode == "bad-shape") bad_shape = true;
  if (mode == "die") die = true;

  std::vector<double> betas{1.0, 1.0};
  double intercept = 0.0;
  std::size_t n_features = 2;
  std::size_t n_outputs = 1;
  std::string task = "regression";
  bool identity = false;
  if (mode == "identity") {
    identity = true;
    n_features = n_outputs = std::stoul(args.at(1));
    task = args.size() > 2 ? args[2] : "classification_logits";
  } else if (mode == "linear") {
    std::string spec = args.at(1);
    if (const auto colon = spec.find(':'); colon != std::string::npos) {
      intercept = std::stod(spec.substr(colon + 1));
      spec.resize(colon);
    }
    betas = numbers(spec);
    n_features = betas.size();
  } else if (mode == "hello") {
    n_features = std::stoul(args.at(1));
    n_outputs = std::stoul(args.at(2));
    task = args.at(3);
    betas.assign(n_features, 0.0);
  }
  send(hello(task, n_features, n_outputs));

  std::string line;
  while (std::getline(std::cin, line)) {
    if (die) {
      std::cerr << "worker crashing on purpose\n" << std::flush;
      std::raise(SIGKILL);
    }
    if (delay_ms) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
    json request;
    try {
      request = json::parse(line);
    } catch (const json::exception& e) {
      send(R"({"id":-1,"error":"malformed request"})");
      continue;
    }
    const long long id = request.at("id").get<long long>();
    if (id == error_on) {
      send(R"({"id":)" + std::to_string(id) + R"(,"error":"requested failure"})");
      continue;
    }
    std::vector<std::vector<double>> outputs;
    for (const auto& row : request.at("inputs")) {
      std::vector<double> x = row.get<std::vector<double>>();
      if (identity) {
        outputs.push_back(x);
      } else if (mode == "hello") {
        std::vector<double> out(n_outputs, 0.0);
        out[0] = 1.0;
        outputs.push_back(out);
      } else {
        double y = intercept;
        for (std::size_t c = 0; c < x.size() && c < betas.size(); ++c) y += betas[c] * x[c];
        outputs.push_back({y});
      }
    }
    if (bad_shape && !outputs.empty()) outputs.pop_back();
    send(R"({"id":)" + std::to_string(bad_id ? id + 7 : id) + R"(,"outputs":)" +
         rows_text(outputs) + "}");
  }
  return 0;
}
