#pragma once

namespace CLI {
class App;
}

namespace gendetect::cli {

/// Adds every subcommand to `app`. Subcommand callbacks run the command and
/// store its status in `exit_code`; errors propagate as exceptions.
void register_commands(CLI::App& app, int& exit_code);

}  // namespace gendetect::cli
