#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "shotsearch/bundle.hpp"
#include "shotsearch/eval.hpp"
#include "shotsearch/text.hpp"

namespace py = pybind11;
using namespace shotsearch;

namespace {

PyObject* g_error_type = nullptr;

using Ranking = std::vector<std::pair<std::string, double>>;

Ranking to_python(const RankedResult& result)
{
    Ranking out;
    out.reserve(result.entries.size());
    for (const auto& e : result.entries) out.emplace_back(e.shot.str(), e.score);
    return out;
}

py::int_ to_int(std::span<const std::uint64_t> words)
{
    py::int_ value(0);
    for (std::size_t i = words.size(); i-- > 0;) {
        value = py::int_((value.attr("__lshift__")(64)).attr("__or__")(py::int_(words[i])));
    }
    return value;
}

std::array<std::uint64_t, 4> to_words(const py::int_& value)
{
    if (value.attr("__lt__")(0).cast<bool>()) {
        throw Error(ErrorKind::InvalidArgument, "codes must be non-negative integers");
    }
    std::array<std::uint64_t, 4> words{};
    py::int_ rest = value;
    const py::int_ mask(~std::uint64_t{0});
    for (auto& w : words) {
        w = rest.attr("__and__")(mask).cast<std::uint64_t>();
        rest = rest.attr("__rshift__")(64);
    }
    if (rest.cast<bool>()) throw Error(ErrorKind::WidthMismatch, "code wider than 256 bits");
    return words;
}

BinaryCode code_of(const py::int_& value, int width)
{
    const auto words = to_words(value);
    for (std::size_t i = static_cast<std::size_t>(std::max(width, 0) / 64); i < words.size(); ++i) {
        if (words[i] != 0) {
            throw Error(ErrorKind::WidthMismatch, "code does not fit in " + std::to_string(width) + " bits");
        }
    }
    return BinaryCode::from_words(width, std::span(words).first(width == 64 ? 1 : 4));
}

SpaceInput space_input(const std::optional<std::filesystem::path>& codes,
                       const std::optional<std::filesystem::path>& features, std::uint64_t seed,
                       std::size_t dimension)
{
    SpaceInput in;
    in.codes = codes;
    in.features = features;
    in.encoder = {seed, dimension};
    return in;
}

py::dict metadata_dict(const BundleMetadata& m)
{
    py::dict d;
    d["shots"] = m.shots;
    d["keyframes"] = m.keyframes;
    d["annotations"] = m.annotations;
    d["text_occurrences"] = m.text_occurrences;
    d["semantic"] = m.semantic.has_value();
    d["low_level"] = m.low_level.has_value();
    d["tree_seed"] = m.tree_seed ? py::cast(*m.tree_seed) : py::none();
    return d;
}

/// Loaded archive; every query releases the GIL.
class Archive {
public:
    explicit Archive(const std::filesystem::path& dir, std::uint64_t fallback_seed)
        : bundle_(std::make_unique<ArchiveBundle>(load_bundle(dir, fallback_seed)))
    {}

    const SimilarityIndex& index() const
    {
        if (!bundle_->similarity) throw Error(ErrorKind::InvalidArgument, "archive has no code spaces");
        return *bundle_->similarity;
    }

    Ranking similar(const std::string& shot, int position, double alpha, std::size_t k,
                    std::size_t shortlist) const
    {
        const auto id = ShotId::parse(shot);
        py::gil_scoped_release release;
        return to_python(query_by_shot(index(), id, position, alpha, k, shortlist));
    }

    Ranking similar_vector(std::vector<double> values, double alpha, std::size_t k, std::size_t shortlist) const
    {
        py::gil_scoped_release release;
        return to_python(query_by_vector(index(), bundle_->encoders(), FeatureVector{std::move(values)}, alpha,
                                         k, shortlist));
    }

    Ranking labeled(const std::string& label, AnnotationKind kind, std::size_t k) const
    {
        py::gil_scoped_release release;
        return to_python(bundle_->annotations.search(label, kind, k));
    }

    Ranking text(const std::string& query, std::size_t k) const
    {
        py::gil_scoped_release release;
        return to_python(bundle_->text.search(query, k));
    }

    const ArchiveBundle& bundle() const { return *bundle_; }

private:
    std::unique_ptr<ArchiveBundle> bundle_;
};

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Shot retrieval over binary codes, annotations and recognized text.";

    g_error_type = py::exception<Error>(m, "ShotsearchError").release().ptr();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object instance = py::reinterpret_borrow<py::object>(g_error_type)(e.what());
            instance.attr("kind") = std::string(to_string(e.kind()));
            PyErr_SetObject(g_error_type, instance.ptr());
        }
    });

    m.def(
        "hamming",
        [](const py::int_& a, const py::int_& b, int width) { return hamming(code_of(a, width), code_of(b, width)); },
        py::arg("a"), py::arg("b"), py::arg("width") = 64,
        "Hamming distance between two codes of the given width (64 or 256).");
    m.def(
        "levenshtein", [](std::string_view a, std::string_view b) { return levenshtein(a, b); }, py::arg("a"),
        py::arg("b"), "Edit distance over Unicode scalar values.");
    m.def("normalize_text", &text::normalize, py::arg("text"));

    m.def(
        "average_precision",
        [](const std::vector<std::string>& ranking, const std::vector<std::string>& relevant, std::size_t cutoff) {
            std::vector<ShotId> ids;
            for (const auto& s : ranking) ids.push_back(ShotId::parse(s));
            std::set<ShotId> rel;
            for (const auto& s : relevant) rel.insert(ShotId::parse(s));
            return average_precision(ids, rel, cutoff);
        },
        py::arg("ranking"), py::arg("relevant"), py::arg("cutoff") = 100);
    m.def(
        "mean_ap", [](const std::vector<double>& aps) { return mean_ap(aps); }, py::arg("aps"));
    m.def(
        "evaluate",
        [](const std::filesystem::path& qrels, const std::filesystem::path& run, std::vector<std::size_t> cutoffs) {
            const auto reports = evaluate_run(join_run(load_run(run), load_judgments(qrels)), cutoffs);
            py::list out;
            for (const auto& r : reports) {
                py::dict d;
                d["cutoff"] = r.cutoff;
                d["mean_ap"] = r.mean_ap;
                d["per_query"] = r.per_query;
                out.append(d);
            }
            return out;
        },
        py::arg("qrels"), py::arg("run"), py::arg("cutoffs") = std::vector<std::size_t>{100, 200});

    py::class_<HyperplaneEncoder>(m, "HyperplaneEncoder")
        .def(py::init<std::uint64_t, std::size_t>(), py::arg("seed"),
             py::arg("dimension") = HyperplaneEncoder::kDefaultDimension)
        .def_property_readonly("seed", &HyperplaneEncoder::seed)
        .def_property_readonly("dimension", &HyperplaneEncoder::dimension)
        .def(
            "encode",
            [](const HyperplaneEncoder& enc, std::vector<double> values) {
                const auto [c64, c256] = enc.encode(FeatureVector{std::move(values)});
                const std::uint64_t low[1] = {c64.bits};
                return py::make_tuple(to_int(low), to_int(c256.words));
            },
            py::arg("values"), "Returns (code64, code256) as integers.");

    m.def(
        "ingest",
        [](const std::filesystem::path& manifest, const std::filesystem::path& out_dir,
           std::optional<std::filesystem::path> semantic_codes,
           std::optional<std::filesystem::path> semantic_features, std::uint64_t semantic_seed,
           std::optional<std::filesystem::path> low_level_codes,
           std::optional<std::filesystem::path> low_level_features, std::uint64_t low_level_seed,
           std::size_t dimension, std::optional<std::filesystem::path> annotations,
           std::optional<std::filesystem::path> text) {
            IngestInputs in;
            in.manifest = manifest;
            in.annotations = annotations;
            in.text = text;
            in.semantic = space_input(semantic_codes, semantic_features, semantic_seed, dimension);
            if (low_level_codes || low_level_features) {
                in.low_level = space_input(low_level_codes, low_level_features, low_level_seed, dimension);
            }
            return metadata_dict(ingest_bundle(in, out_dir));
        },
        py::arg("manifest"), py::arg("out_dir"), py::kw_only(), py::arg("semantic_codes") = py::none(),
        py::arg("semantic_features") = py::none(), py::arg("semantic_seed") = 0,
        py::arg("low_level_codes") = py::none(), py::arg("low_level_features") = py::none(),
        py::arg("low_level_seed") = 0, py::arg("dimension") = HyperplaneEncoder::kDefaultDimension,
        py::arg("annotations") = py::none(), py::arg("text") = py::none());
    m.def(
        "build",
        [](const std::filesystem::path& dir, std::uint64_t seed) { return metadata_dict(build_bundle(dir, seed)); },
        py::arg("bundle"), py::arg("seed") = 1);

    py::class_<Archive>(m, "Archive")
        .def(py::init<const std::filesystem::path&, std::uint64_t>(), py::arg("bundle"),
             py::arg("fallback_seed") = 1)
        .def_property_readonly("shot_count", [](const Archive& a) { return a.bundle().shots.shots().size(); })
        .def_property_readonly("keyframe_count",
                               [](const Archive& a) { return a.bundle().shots.keyframes().size(); })
        .def_property_readonly("metadata", [](const Archive& a) { return metadata_dict(a.bundle().metadata); })
        .def("similar", &Archive::similar, py::arg("shot"), py::arg("position") = 0, py::arg("alpha") = 1.0,
             py::arg("k") = kDefaultResultCount, py::arg("shortlist") = kDefaultShortlist)
        .def("similar_vector", &Archive::similar_vector, py::arg("values"), py::arg("alpha") = 1.0,
             py::arg("k") = kDefaultResultCount, py::arg("shortlist") = kDefaultShortlist)
        .def(
            "concept",
            [](const Archive& a, const std::string& label, std::size_t k) {
                return a.labeled(label, AnnotationKind::Concept, k);
            },
            py::arg("label"), py::arg("k") = kDefaultResultCount)
        .def(
            "person",
            [](const Archive& a, const std::string& name, std::size_t k) {
                return a.labeled(name, AnnotationKind::Person, k);
            },
            py::arg("name"), py::arg("k") = kDefaultResultCount)
        .def("text", &Archive::text, py::arg("query"), py::arg("k") = kDefaultResultCount)
        .def(
            "labels",
            [](const Archive& a, const std::string& kind) {
                return a.bundle().annotations.labels(parse_annotation_kind(kind));
            },
            py::arg("kind") = "concept");
}
