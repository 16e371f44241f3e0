#include "shearo/models/serialize.hpp"

using nlohmann::json;

namespace shearo::nn {

void to_json(json& j, const BackboneConfig& c) {
  j = json{{"in_channels", c.in_channels},
           {"base_channels", c.base_channels},
           {"blocks_per_stage", c.blocks_per_stage},
           {"stem_kernel", c.stem_kernel},
           {"stem_stride", c.stem_stride},
           {"stem_pool", c.stem_pool}};
}

void from_json(const json& j, BackboneConfig& c) {
  c = BackboneConfig{};
  c.in_channels = j.value("in_channels", c.in_channels);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.blocks_per_stage = j.value("blocks_per_stage", c.blocks_per_stage);
  c.stem_kernel = j.value("stem_kernel", c.stem_kernel);
  c.stem_stride = j.value("stem_stride", c.stem_stride);
  c.stem_pool = j.value("stem_pool", c.stem_pool);
}

}  // namespace shearo::nn

namespace shearo::models {

void to_json(json& j, const AeConfig& c) {
  j = json{{"input_width", c.input_width},
           {"input_height", c.input_height},
           {"encoder_dims", c.encoder_dims},
           {"dropout_rate", c.dropout_rate}};
}

void from_json(const json& j, AeConfig& c) {
  c = AeConfig{};
  c.input_width = j.value("input_width", c.input_width);
  c.input_height = j.value("input_height", c.input_height);
  c.encoder_dims = j.value("encoder_dims", c.encoder_dims);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
}

void to_json(json& j, const ConvAeConfig& c) {
  j = json{{"input_width", c.input_width},
           {"input_height", c.input_height},
           {"channels", c.channels},
           {"leaky_slope", c.leaky_slope}};
}

void from_json(const json& j, ConvAeConfig& c) {
  c = ConvAeConfig{};
  c.input_width = j.value("input_width", c.input_width);
  c.input_height = j.value("input_height", c.input_height);
  c.channels = j.value("channels", c.channels);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
}

void to_json(json& j, const StfpmConfig& c) {
  j = json{{"backbone", c.backbone},
           {"input_width", c.input_width},
           {"input_height", c.input_height},
           {"combine", c.combine == StfpmConfig::Combine::product ? "product" : "sum"},
           {"norm_mean", c.norm_mean},
           {"norm_std", c.norm_std}};
}

void from_json(const json& j, StfpmConfig& c) {
  c = StfpmConfig{};
  if (j.contains("backbone")) c.backbone = j.at("backbone").get<nn::BackboneConfig>();
  c.input_width = j.value("input_width", c.input_width);
  c.input_height = j.value("input_height", c.input_height);
  const std::string combine = j.value("combine", "product");
  if (combine != "product" && combine != "sum")
    throw ValidationError("stfpm combine must be product or sum");
  c.combine = combine == "sum" ? StfpmConfig::Combine::sum : StfpmConfig::Combine::product;
  c.norm_mean = j.value("norm_mean", c.norm_mean);
  c.norm_std = j.value("norm_std", c.norm_std);
}

}  // namespace shearo::models

namespace shearo::synthgen {

void to_json(json& j, const SpecimenSpec& c) {
  j = json{{"width_px", c.width_px},
           {"height_px", c.height_px},
           {"physical_width_mm", c.physical_width_mm},
           {"physical_height_mm", c.physical_height_mm}};
}

void from_json(const json& j, SpecimenSpec& c) {
  c = SpecimenSpec{};
  c.width_px = j.value("width_px", c.width_px);
  c.height_px = j.value("height_px", c.height_px);
  c.physical_width_mm = j.value("physical_width_mm", c.physical_width_mm);
  c.physical_height_mm = j.value("physical_height_mm", c.physical_height_mm);
}

void to_json(json& j, const ShearConfig& c) {
  j = json{{"shear_dx", c.shear_dx}, {"shear_dy", c.shear_dy}, {"sensitivity", c.sensitivity}};
}

void from_json(const json& j, ShearConfig& c) {
  c = ShearConfig{};
  c.shear_dx = j.value("shear_dx", c.shear_dx);
  c.shear_dy = j.value("shear_dy", c.shear_dy);
  c.sensitivity = j.value("sensitivity", c.sensitivity);
}

void to_json(json& j, const NoiseSpec& c) {
  j = json{{"speckle_sigma", c.speckle_sigma},
           {"decorrelation_fraction", c.decorrelation_fraction}};
}

void from_json(const json& j, NoiseSpec& c) {
  c = NoiseSpec{};
  c.speckle_sigma = j.value("speckle_sigma", c.speckle_sigma);
  c.decorrelation_fraction = j.value("decorrelation_fraction", c.decorrelation_fraction);
}

void to_json(json& j, const CampaignSpec& c) {
  j = json{{"defective_count", c.defective_count},
           {"fixed_count", c.fixed_count},
           {"deformed_count", c.deformed_count},
           {"defect_radius_min_px", c.defect_radius_min_px},
           {"defect_radius_max_px", c.defect_radius_max_px},
           {"defect_height_min", c.defect_height_min},
           {"defect_height_max", c.defect_height_max},
           {"two_defect_probability", c.two_defect_probability},
           {"plateau_probability", c.plateau_probability},
           {"max_fringes", c.max_fringes},
           {"max_coefficient", c.max_coefficient},
           {"defective_global_scale", c.defective_global_scale}};
}

void from_json(const json& j, CampaignSpec& c) {
  c = CampaignSpec{};
  c.defective_count = j.value("defective_count", c.defective_count);
  c.fixed_count = j.value("fixed_count", c.fixed_count);
  c.deformed_count = j.value("deformed_count", c.deformed_count);
  c.defect_radius_min_px = j.value("defect_radius_min_px", c.defect_radius_min_px);
  c.defect_radius_max_px = j.value("defect_radius_max_px", c.defect_radius_max_px);
  c.defect_height_min = j.value("defect_height_min", c.defect_height_min);
  c.defect_height_max = j.value("defect_height_max", c.defect_height_max);
  c.two_defect_probability = j.value("two_defect_probability", c.two_defect_probability);
  c.plateau_probability = j.value("plateau_probability", c.plateau_probability);
  c.max_fringes = j.value("max_fringes", c.max_fringes);
  c.max_coefficient = j.value("max_coefficient", c.max_coefficient);
  c.defective_global_scale = j.value("defective_global_scale", c.defective_global_scale);
}

void to_json(json& j, const GeneratorConfig& c) {
  j = json{{"specimen", c.specimen},
           {"shear", c.shear},
           {"noise", c.noise},
           {"campaign", c.campaign},
           {"filter_window", c.filter_window},
           {"write_png_previews", c.write_png_previews}};
}

void from_json(const json& j, GeneratorConfig& c) {
  c = GeneratorConfig{};
  if (j.contains("specimen")) c.specimen = j.at("specimen").get<SpecimenSpec>();
  if (j.contains("shear")) c.shear = j.at("shear").get<ShearConfig>();
  if (j.contains("noise")) c.noise = j.at("noise").get<NoiseSpec>();
  if (j.contains("campaign")) c.campaign = j.at("campaign").get<CampaignSpec>();
  c.filter_window = j.value("filter_window", c.filter_window);
  c.write_png_previews = j.value("write_png_previews", c.write_png_previews);
}

}  // namespace shearo::synthgen
