#include "support.hpp"

#include "prvkit/error.hpp"
#include "prvkit/prv_format.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace prvkit;

namespace
{

TraceBundle minimal_bundle(std::uint32_t tasks = 1)
{
    TraceBundle b;
    auto [process, resources] = single_node_model(tasks);
    b.header = {{5, 3, 2024, 9, 7}, 0, resources, process};
    return b;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spill(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary) << text;
}

} // namespace

TEST_CASE("header only")
{
    const auto b = minimal_bundle();
    CHECK(format_prv(b.header, b.records) == "#Paraver (05/03/24 at 09:07):0_ns:1(1):1:1(1:1)\n");
}

TEST_CASE("header with several applications and nodes")
{
    TraceHeader h;
    std::tie(h.process, h.resources) = build_model(2, {2, 1}, {2, 1, 4}, {1, 2, 2}, {4, 8});
    h.total_time = 123456;
    h.captured = {31, 12, 2023, 23, 59};
    const auto line = format_header(h);
    CHECK(line == "#Paraver (31/12/23 at 23:59):123456_ns:2(4,8):2:2(2:1,1:2):1(4:2)");
    CHECK(parse_header(line) == h);
}

TEST_CASE("header variants accepted by the parser")
{
    const auto h = parse_header("#Paraver (05/03/2024 at 09:07):77:1(2):1:2(1:1,1:1),2");
    CHECK(h.total_time == 77);
    CHECK(h.captured == CaptureTime{5, 3, 2024, 9, 7});
    CHECK(h.process.total_tasks() == 2);
    CHECK_THROWS_AS(parse_header("Paraver 1:2"), ParseError);
    CHECK_THROWS_AS(parse_header("#Paraver (05/03/24 at 09:07):x_ns:1(1):1:1(1:1)"), ParseError);
}

TEST_CASE("record lines")
{
    CHECK(format_record(EventRecord{{1, 1, 3, 1}, 5, {{84210, 1024}}}) == "2:1:1:3:1:5:84210:1024");
    CHECK(format_record(StateRecord{{1, 1, 2, 1}, 0, 100, 1}) == "1:1:1:2:1:0:100:1");
    CHECK(format_record(CommRecord{{1, 1, 1, 1}, {1, 1, 2, 1}, 100, 100, 200, 200, 1024, 7}) ==
          "3:1:1:1:1:100:100:1:1:2:1:200:200:1024:7");
    CHECK(format_record(EventRecord{{0, 1, 1, 1}, 9, {{1, 2}, {3, 4}}}) == "2:0:1:1:1:9:1:2:3:4");
}

TEST_CASE("parse records")
{
    const auto c = parse_prv("#Paraver (01/01/24 at 00:00):300_ns:1(1):1:2(1:1,1:1)\n"
                             "1:1:1:2:1:0:100:1\n"
                             "3:1:1:1:1:100:100:1:1:2:1:200:200:1024:7\n"
                             "2:1:1:1:1:250:5:6:7:8\n");
    REQUIRE(c.records.size() == 3);
    CHECK(std::get<StateRecord>(c.records[0]) == StateRecord{{1, 1, 2, 1}, 0, 100, 1});
    const auto& comm = std::get<CommRecord>(c.records[1]);
    CHECK(comm.size == 1024);
    CHECK(comm.tag == 7);
    CHECK(comm.physical_send == 100);
    CHECK(comm.physical_recv == 200);
    CHECK(std::get<EventRecord>(c.records[2]).pairs == std::vector<EventPair>{{5, 6}, {7, 8}});
}

TEST_CASE("parse errors carry line numbers")
{
    const std::string head = "#Paraver (01/01/24 at 00:00):300_ns:1(1):1:1(1:1)\n";
    CHECK_THROWS_WITH_AS(parse_prv(head + "2:1:1:1:1:5:1:1\n4:1:1\n"),
                         doctest::Contains("unknown record type 4 at line 3"), ParseError);
    CHECK_THROWS_WITH_AS(parse_prv(head + "1:1:1:1:1:0:x:1\n"), doctest::Contains("line 2"), ParseError);
    CHECK_THROWS_WITH_AS(parse_prv(head + "1:1:1:1:1:0:1\n"), doctest::Contains("line 2"), ParseError);
    CHECK_THROWS_WITH_AS(parse_prv(head + "2:1:1:1:1:5:1\n"), doctest::Contains("line 2"), ParseError);
    CHECK_THROWS_WITH_AS(parse_prv(head + "2:1:1:1:1:5:1:1"), doctest::Contains("truncated"), ParseError);
    CHECK_THROWS_AS(parse_prv(""), ParseError);
    try
    {
        parse_prv(head + "\n\n9:1\n");
        FAIL("expected a parse error");
    }
    catch (const ParseError& e)
    {
        CHECK(e.line() == 4);
    }
}

TEST_CASE("pcf layout")
{
    EventRegistry reg;
    reg.add(84210, "Vector length");
    reg.add(50000001, "MPI routine", {{0, "End"}, {1, "MPI_Waitany"}});
    const auto pcf = format_pcf(reg, default_state_table());
    CHECK(pcf.find("EVENT_TYPE\n0    84210    Vector length\n") != std::string::npos);
    CHECK(pcf.find("EVENT_TYPE\n0    50000001    MPI routine\nVALUES\n0    End\n1    MPI_Waitany\n") !=
          std::string::npos);
    CHECK(pcf.find("STATES\n0    Idle\n1    Running\n7    External\n") != std::string::npos);
    const auto back = parse_pcf(pcf);
    CHECK(back.registry == reg);
    CHECK(back.states == default_state_table());
}

TEST_CASE("pcf groups share their VALUES block")
{
    const auto pcf = parse_pcf("EVENT_TYPE\n0 10 A\n0 11 B\nVALUES\n1 one\n\nEVENT_TYPE\n0 12 C\n");
    REQUIRE(pcf.registry.entries().size() == 3);
    CHECK(pcf.registry.find(10)->value_labels.at(1) == "one");
    CHECK(pcf.registry.find(11)->value_labels.at(1) == "one");
    CHECK(pcf.registry.find(12)->value_labels.empty());
}

TEST_CASE("row layout")
{
    auto [process, resources] = single_node_model(2);
    const auto rows = default_row_labels(process, resources);
    CHECK(format_row(rows) == "LEVEL THREAD SIZE 2\nTHREAD 1.1.1\nTHREAD 1.2.1\n\n"
                              "LEVEL TASK SIZE 2\nTASK 1.1\nTASK 1.2\n\n"
                              "LEVEL NODE SIZE 1\nnode1\n\n");
    CHECK(parse_row(format_row(rows)) == rows);
    CHECK_THROWS_AS(parse_row("LEVEL TASK SIZE 3\nA\n"), ParseError);
}

TEST_CASE("write and parse a bundle")
{
    const auto dir = testing::scratch_dir("format");
    auto b = minimal_bundle(3);
    b.header.total_time = 500;
    b.registry.add(84210, "Vector length", {{1024, "1 KiB"}});
    b.records = {StateRecord{{0, 1, 1, 1}, 0, 500, 1}, EventRecord{{1, 1, 3, 1}, 5, {{84210, 1024}}},
                 CommRecord{{0, 1, 1, 1}, {0, 1, 2, 1}, 10, 10, 20, 20, 64, 1}};
    sort_records(b.records);
    b.row_labels = default_row_labels(b.header.process, b.header.resources);

    write_bundle(b, dir / "t");
    CHECK(slurp(dir / "t.prv").find("\n2:1:1:3:1:5:84210:1024\n") != std::string::npos);
    CHECK(parse_bundle(dir / "t") == b);

    const auto first = slurp(dir / "t.prv") + slurp(dir / "t.pcf") + slurp(dir / "t.row");
    write_bundle(b, dir / "t");
    CHECK(first == slurp(dir / "t.prv") + slurp(dir / "t.pcf") + slurp(dir / "t.row"));
}

TEST_CASE("write_bundle refuses invalid bundles")
{
    const auto dir = testing::scratch_dir("invalid");
    auto b = minimal_bundle();
    b.records.push_back(EventRecord{{0, 1, 2, 1}, 0, {{1, 1}}});
    CHECK_THROWS_AS(write_bundle(b, dir / "bad"), InvalidBundleError);
    CHECK_FALSE(std::filesystem::exists(dir / "bad.prv"));
}

TEST_CASE("missing pcf and row files are tolerated")
{
    const auto dir = testing::scratch_dir("missing");
    spill(dir / "only.prv", "#Paraver (01/01/24 at 00:00):10_ns:1(1):1:1(1:1)\n1:0:1:1:1:0:10:1\n");
    std::vector<std::string> warnings;
    set_warning_handler([&](const std::string& w) { warnings.push_back(w); });
    const auto b = parse_bundle(dir / "only");
    set_warning_handler({});
    CHECK(warnings.size() == 2);
    CHECK(b.records.size() == 1);
    CHECK(b.registry.empty());
    CHECK(b.row_labels.empty());
    CHECK_THROWS_AS(parse_bundle(dir / "absent"), IoError);
}

TEST_CASE("validation")
{
    auto b = minimal_bundle(16);
    b.header.total_time = 1000;
    CHECK(validate_bundle(b).ok());

    auto out_of_range = b;
    out_of_range.records.push_back(EventRecord{{0, 1, 17, 1}, 1, {{5, 1}}});
    const auto r1 = validate_bundle(out_of_range);
    REQUIRE(r1.violations.size() == 1);
    CHECK(r1.violations[0].kind == ViolationKind::location_out_of_range);
    CHECK(r1.violations[0].message.find("location out of range") != std::string::npos);

    auto causal = b;
    causal.records.push_back(CommRecord{{0, 1, 1, 1}, {0, 1, 2, 1}, 200, 200, 100, 100, 8, 0});
    CHECK(validate_bundle(causal).count(ViolationKind::causality) == 1);

    auto misc = b;
    misc.records.push_back(StateRecord{{0, 1, 1, 1}, 50, 40, 1});
    misc.records.push_back(StateRecord{{0, 1, 1, 1}, 0, 10, 3});
    misc.records.push_back(EventRecord{{0, 1, 1, 1}, 2000, {{5, 1}}});
    misc.records.push_back(EventRecord{{0, 1, 1, 1}, 5, {}});
    misc.records.push_back(EventRecord{{99, 1, 1, 1}, 5, {{5, 1}}});
    misc.pending_comms.push_back({CommDirection::send, {0, 1, 1, 1}, {0, 1, 2, 1}, 0, 8, 3, "unmatched"});
    misc.registry.add_unchecked({5, "a", {}});
    misc.registry.add_unchecked({5, "b", {}});
    misc.state_table[9] = "bad\nlabel";
    misc.row_labels.tasks = {"only one"};
    const auto r2 = validate_bundle(misc);
    CHECK(r2.count(ViolationKind::state_order) == 1);
    CHECK(r2.count(ViolationKind::unknown_state) == 1);
    CHECK(r2.count(ViolationKind::beyond_end) == 1);
    CHECK(r2.count(ViolationKind::malformed_event) == 1);
    CHECK(r2.count(ViolationKind::location_out_of_range) == 1);
    CHECK(r2.count(ViolationKind::unmatched_comm) == 1);
    CHECK(r2.count(ViolationKind::duplicate_type) == 1);
    CHECK(r2.count(ViolationKind::bad_label) == 1);
    CHECK(r2.count(ViolationKind::row_label_count) >= 1);
}

TEST_CASE("round trip of random bundles")
{
    const auto dir = testing::scratch_dir("roundtrip");
    std::mt19937_64 rng(2024);
    for (int i = 0; i < 150; ++i)
    {
        const auto b = testing::random_bundle(rng);
        const auto report = validate_bundle(b);
        INFO("bundle " << i << ": " << (report.ok() ? "" : report.violations[0].message));
        REQUIRE(report.ok());
        write_bundle(b, dir / "r");
        const auto back = parse_bundle(dir / "r");
        CHECK(back.header == b.header);
        CHECK(back.records == b.records);
        CHECK(back.registry == b.registry);
        CHECK(back.state_table == b.state_table);
        CHECK(back.row_labels == b.row_labels);
    }
}

TEST_CASE("parser never fails with anything but a diagnostic")
{
    std::mt19937_64 rng(99);
    const auto seed = testing::random_bundle(rng);
    const auto valid = format_prv(seed.header, seed.records);
    const auto pcf = format_pcf(seed.registry, seed.state_table);
    const auto row = format_row(default_row_labels(seed.header.process, seed.header.resources));
    const std::string alphabet = "0123456789:#()_,\n ParvenLEVTHRADSIZ-x";

    auto mutate = [&](std::string s) {
        for (auto n = testing::pick(rng, 1, 6); n > 0 && !s.empty(); --n)
        {
            const auto pos = testing::pick(rng, 0, s.size() - 1);
            switch (testing::pick(rng, 0, 3))
            {
            case 0:
                s[pos] = alphabet[testing::pick(rng, 0, alphabet.size() - 1)];
                break;
            case 1:
                s.erase(pos, testing::pick(rng, 1, 8));
                break;
            case 2:
                s.insert(pos, 1, alphabet[testing::pick(rng, 0, alphabet.size() - 1)]);
                break;
            default:
                s.insert(pos, std::to_string(rng()));
            }
        }
        return s;
    };

    std::size_t parsed = 0, diagnosed = 0;
    for (int i = 0; i < 3000; ++i)
    {
        std::string input;
        if (i % 10 == 0)
        {
            input.resize(testing::pick(rng, 0, 200));
            for (auto& c : input)
                c = static_cast<char>(testing::pick(rng, 0, 255));
        }
        const auto target = i % 3;
        if (input.empty())
            input = mutate(target == 0 ? valid : target == 1 ? pcf : row);
        try
        {
            if (target == 0)
                parse_prv(input);
            else if (target == 1)
                parse_pcf(input);
            else
                parse_row(input);
            ++parsed;
        }
        catch (const ParseError& e)
        {
            CHECK(e.line() >= 1);
            ++diagnosed;
        }
    }
    CHECK(parsed + diagnosed == 3000);
    CHECK(diagnosed > 0);
}
