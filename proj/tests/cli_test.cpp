#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd =
        std::string(AFFECT_RUN_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

struct Workspace {
    fs::path root;
    fs::path config;

    Workspace() {
        root = fs::temp_directory_path() / "affect_cli_test";
        fs::remove_all(root);
        fs::create_directories(root);
        config = root / "run.cfg";
        std::ofstream os(config);
        os << "seed = 7\n"
           << "model.conv_widths = 4,4,8\n"
           << "model.fc = 16,8,10,7\n"
           << "pretrain.epochs = 200\n"
           << "pretrain.batch = 16\n"
           << "pretrain.lr = 0.001\n"
           << "cae.encoder_size = 16\n"
           << "cae.epochs = 3\n"
           << "cae.batch = 16\n"
           << "cae.lr = 0.001\n"
           << "synth.subjects = 2\n"
           << "synth.frames = 40\n"
           << "synth.train_subjects = 1\n"
           << "synth.per_class = 10\n"
           << "data.fer_csv = " << (root / "data" / "fer.csv").string() << "\n"
           << "data.recola_root = " << (root / "data" / "recola").string()
           << "\n"
           << "svr.c_grid = 1,10\n"
           << "svr.eps_grid = 0.01\n";
    }

    std::string flags(const std::string& out) const {
        return "--config " + config.string() + " --out " +
               (root / out).string();
    }
    fs::path out(const std::string& name) const { return root / name; }
};

std::vector<std::string> csv_lines(const fs::path& path) {
    std::ifstream is(path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
    return lines;
}

}  // namespace

TEST_CASE("cli pipeline end to end") {
    Workspace ws;

    // config / prerequisite failures first
    {
        std::ofstream bad(ws.root / "bad.cfg");
        bad << "definitely.not.a.key = 1\n";
    }
    CHECK(run("pretrain --config " + (ws.root / "bad.cfg").string() +
              " --out " + (ws.root / "bad_out").string()) == 1);
    CHECK(run("pretrain " + ws.flags("no_data")) == 2);
    CHECK(run("encode " + ws.flags("no_cae")) == 2);

    // synth-data writes both dataset shapes
    REQUIRE(run("synth-data " + ws.flags("data")) == 0);
    CHECK(fs::exists(ws.out("data") / "fer.csv"));
    CHECK(fs::exists(ws.out("data") / "recola" / "train"));
    CHECK(fs::exists(ws.out("data") / "config.resolved"));
    CHECK(!fs::exists(ws.out("data") / ".lock"));

    // a tiny 7-class set is learnable within 200 epochs
    REQUIRE(run("pretrain " + ws.flags("run")) == 0);
    double train_acc = -1.0;
    for (const std::string& line :
         csv_lines(ws.out("run") / "pretrain_scores.csv"))
        if (line.rfind("train,", 0) == 0)
            train_acc = std::stod(line.substr(line.rfind(',') + 1));
    CHECK(train_acc > 0.9);

    // identical seed, identical artifacts
    const std::string loss_first = slurp(ws.out("run") / "pretrain_loss.csv");
    const std::string ckpt_first = slurp(ws.out("run") / "pretrain.ckpt");
    REQUIRE(run("pretrain " + ws.flags("run")) == 0);
    CHECK(slurp(ws.out("run") / "pretrain_loss.csv") == loss_first);
    CHECK(slurp(ws.out("run") / "pretrain.ckpt") == ckpt_first);

    REQUIRE(run("train-cae " + ws.flags("run")) == 0);
    REQUIRE(run("encode " + ws.flags("run")) == 0);
    const fs::path features = ws.out("run") / "features";
    CHECK(fs::exists(features / "train_subj0.csv"));
    CHECK(fs::exists(features / "val_subj1.csv"));

    const std::string enc_first = slurp(features / "train_subj0.csv");
    REQUIRE(run("encode " + ws.flags("run")) == 0);
    CHECK(slurp(features / "train_subj0.csv") == enc_first);

    REQUIRE(run("train-svr " + ws.flags("run")) == 0);
    REQUIRE(run("postprocess " + ws.flags("run")) == 0);
    REQUIRE(run("evaluate " + ws.flags("run")) == 0);

    std::vector<std::string> scores =
        csv_lines(ws.out("run") / "scores.csv");
    REQUIRE(scores.size() == 3);
    CHECK(scores[0] ==
          "dimension,n,raw_pearson,raw_rmse,raw_ccc,post_pearson,post_rmse,"
          "post_ccc");
    for (std::size_t r = 1; r < scores.size(); ++r) {
        std::vector<std::string> cells;
        std::istringstream is(scores[r]);
        std::string cell;
        while (std::getline(is, cell, ',')) cells.push_back(cell);
        REQUIRE(cells.size() == 8);
        CHECK(std::stoul(cells[1]) == 40);  // frames of the dev subject
        // the chain gate never hands back something worse than raw
        CHECK(std::stod(cells[7]) >= std::stod(cells[4]) - 1e-12);
    }

    // a delay of 5 frames shortens the evaluated series by 5
    {
        std::ofstream os(ws.config, std::ios::app);
        os << "eval.delay = 5\n";
    }
    REQUIRE(run("train-svr " + ws.flags("run")) == 0);
    REQUIRE(run("postprocess " + ws.flags("run")) == 0);
    REQUIRE(run("evaluate " + ws.flags("run")) == 0);
    std::vector<std::string> delayed =
        csv_lines(ws.out("run") / "scores.csv");
    CHECK(delayed[1].find(",35,") != std::string::npos);

    // sweep over two encoder sizes: two rows per dimension
    {
        std::ofstream os(ws.config, std::ios::app);
        os << "sweep.encoder_size = 8,16\n"
           << "cae.pretrain_checkpoint = "
           << (ws.out("run") / "pretrain.ckpt").string() << "\n";
    }
    REQUIRE(run("sweep " + ws.flags("sweep") + " --jobs 2") == 0);
    std::vector<std::string> sweep = csv_lines(ws.out("sweep") / "sweep.csv");
    REQUIRE(sweep.size() == 5);  // header + 2 sizes x 2 dimensions
    CHECK(sweep[0] ==
          "freeze,encoder_size,delay,dimension,n,raw_ccc,post_ccc,status");
    std::size_t valence_rows = 0;
    for (std::size_t r = 1; r < sweep.size(); ++r) {
        CHECK(sweep[r].find(",ok") != std::string::npos);
        if (sweep[r].find("valence") != std::string::npos) ++valence_rows;
    }
    CHECK(valence_rows == 2);

    fs::remove_all(ws.root);
}
