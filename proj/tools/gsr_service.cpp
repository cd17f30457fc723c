// Relight render service: HTTP + WebSocket front end over an asset directory.

#include "gsr/service/server.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"gsr_service: relight render service"};
  std::string assets = ".";
  std::string host = "127.0.0.1";
  unsigned short port = 8080;
  app.add_option("--assets", assets, "Directory of *.gsr assets")->check(CLI::ExistingDirectory);
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "TCP port (0 picks a free one)");
  CLI11_PARSE(app, argc, argv);

  try {
    gsr::service::Service service(assets);
    gsr::service::HttpServer server(service, host, port);
    std::cout << "gsr_service listening on " << host << ":" << server.port() << " assets=" << assets << std::endl;
    server.run();
  } catch (const std::exception& e) {
    std::cerr << "gsr_service: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
