#include "iotw/evalstats.hpp"

#include <algorithm>
#include <cmath>

#include "iotw/errors.hpp"

namespace iotw::evalstats {

namespace {

// Critical values of the F distribution at significance 0.05.
// Rows: df1 = 1..12; columns: df2 = 1..120.
constexpr int kMaxDf1 = 12;
constexpr int kMaxDf2 = 120;
constexpr double kFTable05[kMaxDf1][kMaxDf2] = {
    {161.447639, 18.512821, 10.127964, 7.708647, 6.607891, 5.987378, 5.591448, 5.317655, 5.117355, 4.964603, 4.844336, 4.747225, 4.667193, 4.600110, 4.543077, 4.493998, 4.451322, 4.413873, 4.380750, 4.351244, 4.324794, 4.300950, 4.279344, 4.259677, 4.241699, 4.225201, 4.210008, 4.195972, 4.182964, 4.170877, 4.159615, 4.149097, 4.139252, 4.130018, 4.121338, 4.113165, 4.105456, 4.098172, 4.091279, 4.084746, 4.078546, 4.072654, 4.067047, 4.061706, 4.056612, 4.051749, 4.047100, 4.042652, 4.038393, 4.034310, 4.030393, 4.026631, 4.023017, 4.019541, 4.016195, 4.012973, 4.009868, 4.006873, 4.003983, 4.001191, 3.998494, 3.995887, 3.993365, 3.990924, 3.988560, 3.986269, 3.984049, 3.981896, 3.979807, 3.977779, 3.975810, 3.973897, 3.972038, 3.970230, 3.968471, 3.966760, 3.965094, 3.963472, 3.961892, 3.960352, 3.958852, 3.957388, 3.955961, 3.954568, 3.953209, 3.951882, 3.950587, 3.949321, 3.948084, 3.946876, 3.945694, 3.944539, 3.943409, 3.942303, 3.941222, 3.940163, 3.939126, 3.938111, 3.937117, 3.936143, 3.935189, 3.934253, 3.933337, 3.932438, 3.931556, 3.930692, 3.929844, 3.929012, 3.928195, 3.927394, 3.926607, 3.925834, 3.925076, 3.924330, 3.923599, 3.922879, 3.922173, 3.921478, 3.920796, 3.920124},
    {199.500000, 19.000000, 9.552094, 6.944272, 5.786135, 5.143253, 4.737414, 4.458970, 4.256495, 4.102821, 3.982298, 3.885294, 3.805565, 3.738892, 3.682320, 3.633723, 3.591531, 3.554557, 3.521893, 3.492828, 3.466800, 3.443357, 3.422132, 3.402826, 3.385190, 3.369016, 3.354131, 3.340386, 3.327654, 3.315830, 3.304817, 3.294537, 3.284918, 3.275898, 3.267424, 3.259446, 3.251924, 3.244818, 3.238096, 3.231727, 3.225684, 3.219942, 3.214480, 3.209278, 3.204317, 3.199582, 3.195056, 3.190727, 3.186582, 3.182610, 3.178799, 3.175141, 3.171626, 3.168246, 3.164993, 3.161861, 3.158843, 3.155932, 3.153123, 3.150411, 3.147791, 3.145258, 3.142809, 3.140438, 3.138142, 3.135918, 3.133762, 3.131672, 3.129644, 3.127676, 3.125764, 3.123907, 3.122103, 3.120349, 3.118642, 3.116982, 3.115366, 3.113792, 3.112260, 3.110766, 3.109311, 3.107891, 3.106507, 3.105157, 3.103839, 3.102552, 3.101296, 3.100069, 3.098870, 3.097698, 3.096553, 3.095433, 3.094337, 3.093266, 3.092217, 3.091191, 3.090187, 3.089203, 3.088240, 3.087296, 3.086371, 3.085465, 3.084577, 3.083706, 3.082852, 3.082015, 3.081193, 3.080387, 3.079596, 3.078819, 3.078057, 3.077309, 3.076574, 3.075853, 3.075144, 3.074447, 3.073763, 3.073090, 3.072429, 3.071779},
    {215.707345, 19.164292, 9.276628, 6.591382, 5.409451, 4.757063, 4.346831, 4.066181, 3.862548, 3.708265, 3.587434, 3.490295, 3.410534, 3.343889, 3.287382, 3.238872, 3.196777, 3.159908, 3.127350, 3.098391, 3.072467, 3.049125, 3.027998, 3.008787, 2.991241, 2.975154, 2.960351, 2.946685, 2.934030, 2.922277, 2.911334, 2.901120, 2.891564, 2.882604, 2.874187, 2.866266, 2.858796, 2.851741, 2.845068, 2.838745, 2.832747, 2.827049, 2.821628, 2.816466, 2.811544, 2.806845, 2.802355, 2.798061, 2.793949, 2.790008, 2.786229, 2.782600, 2.779114, 2.775762, 2.772537, 2.769431, 2.766438, 2.763552, 2.760767, 2.758078, 2.755481, 2.752970, 2.750541, 2.748191, 2.745915, 2.743711, 2.741574, 2.739502, 2.737492, 2.735541, 2.733647, 2.731807, 2.730019, 2.728280, 2.726589, 2.724944, 2.723343, 2.721783, 2.720265, 2.718785, 2.717343, 2.715937, 2.714565, 2.713227, 2.711921, 2.710647, 2.709402, 2.708186, 2.706999, 2.705838, 2.704703, 2.703594, 2.702509, 2.701448, 2.700409, 2.699393, 2.698398, 2.697423, 2.696469, 2.695534, 2.694618, 2.693721, 2.692841, 2.691979, 2.691133, 2.690303, 2.689490, 2.688691, 2.687908, 2.687139, 2.686384, 2.685643, 2.684916, 2.684201, 2.683499, 2.682809, 2.682132, 2.681466, 2.680811, 2.680168},
    {224.583241, 19.246794, 9.117182, 6.388233, 5.192168, 4.533677, 4.120312, 3.837853, 3.633089, 3.478050, 3.356690, 3.259167, 3.179117, 3.112250, 3.055568, 3.006917, 2.964708, 2.927744, 2.895107, 2.866081, 2.840100, 2.816708, 2.795539, 2.776289, 2.758710, 2.742594, 2.727765, 2.714076, 2.701399, 2.689628, 2.678667, 2.668437, 2.658867, 2.649894, 2.641465, 2.633532, 2.626052, 2.618988, 2.612306, 2.605975, 2.599969, 2.594263, 2.588836, 2.583667, 2.578739, 2.574035, 2.569540, 2.565241, 2.561124, 2.557179, 2.553395, 2.549763, 2.546273, 2.542918, 2.539689, 2.536579, 2.533583, 2.530694, 2.527907, 2.525215, 2.522615, 2.520101, 2.517670, 2.515318, 2.513040, 2.510833, 2.508695, 2.506621, 2.504609, 2.502656, 2.500760, 2.498919, 2.497129, 2.495388, 2.493696, 2.492049, 2.490447, 2.488886, 2.487366, 2.485885, 2.484441, 2.483034, 2.481661, 2.480322, 2.479015, 2.477740, 2.476494, 2.475277, 2.474089, 2.472927, 2.471791, 2.470681, 2.469595, 2.468533, 2.467494, 2.466476, 2.465480, 2.464505, 2.463550, 2.462615, 2.461698, 2.460800, 2.459920, 2.459057, 2.458210, 2.457380, 2.456566, 2.455767, 2.454983, 2.454213, 2.453458, 2.452716, 2.451988, 2.451273, 2.450571, 2.449880, 2.449202, 2.448536, 2.447881, 2.447237},
    {230.161878, 19.296410, 9.013455, 6.256057, 5.050329, 4.387374, 3.971523, 3.687499, 3.481659, 3.325835, 3.203874, 3.105875, 3.025438, 2.958249, 2.901295, 2.852409, 2.809996, 2.772853, 2.740058, 2.710890, 2.684781, 2.661274, 2.639999, 2.620654, 2.602987, 2.586790, 2.571886, 2.558128, 2.545386, 2.533555, 2.522538, 2.512255, 2.502635, 2.493616, 2.485143, 2.477169, 2.469650, 2.462548, 2.455831, 2.449466, 2.443429, 2.437693, 2.432236, 2.427040, 2.422085, 2.417356, 2.412837, 2.408514, 2.404375, 2.400409, 2.396605, 2.392953, 2.389444, 2.386070, 2.382823, 2.379697, 2.376684, 2.373780, 2.370977, 2.368270, 2.365656, 2.363128, 2.360684, 2.358318, 2.356028, 2.353809, 2.351658, 2.349573, 2.347550, 2.345586, 2.343680, 2.341828, 2.340028, 2.338278, 2.336576, 2.334920, 2.333308, 2.331739, 2.330210, 2.328721, 2.327269, 2.325854, 2.324473, 2.323126, 2.321812, 2.320529, 2.319277, 2.318053, 2.316858, 2.315689, 2.314547, 2.313431, 2.312339, 2.311270, 2.310225, 2.309202, 2.308200, 2.307220, 2.306259, 2.305318, 2.304396, 2.303493, 2.302608, 2.301739, 2.300888, 2.300053, 2.299234, 2.298431, 2.297642, 2.296868, 2.296109, 2.295363, 2.294630, 2.293911, 2.293205, 2.292510, 2.291828, 2.291158, 2.290499, 2.289851},
    {233.986000, 19.329534, 8.940645, 6.163132, 4.950288, 4.283866, 3.865969, 3.580580, 3.373754, 3.217175, 3.094613, 2.996120, 2.915269, 2.847726, 2.790465, 2.741311, 2.698660, 2.661305, 2.628318, 2.598978, 2.572712, 2.549061, 2.527655, 2.508189, 2.490410, 2.474109, 2.459108, 2.445259, 2.432434, 2.420523, 2.409432, 2.399080, 2.389394, 2.380313, 2.371781, 2.363751, 2.356179, 2.349027, 2.342262, 2.335852, 2.329771, 2.323994, 2.318498, 2.313264, 2.308273, 2.303509, 2.298956, 2.294601, 2.290432, 2.286436, 2.282603, 2.278923, 2.275388, 2.271989, 2.268717, 2.265567, 2.262532, 2.259605, 2.256780, 2.254053, 2.251418, 2.248871, 2.246408, 2.244024, 2.241716, 2.239480, 2.237312, 2.235210, 2.233171, 2.231192, 2.229271, 2.227404, 2.225590, 2.223826, 2.222110, 2.220441, 2.218817, 2.217235, 2.215694, 2.214193, 2.212730, 2.211303, 2.209911, 2.208554, 2.207229, 2.205936, 2.204673, 2.203439, 2.202234, 2.201056, 2.199905, 2.198779, 2.197679, 2.196602, 2.195548, 2.194516, 2.193506, 2.192518, 2.191549, 2.190601, 2.189672, 2.188761, 2.187868, 2.186993, 2.186134, 2.185293, 2.184467, 2.183657, 2.182862, 2.182082, 2.181316, 2.180564, 2.179825, 2.179100, 2.178387, 2.177687, 2.177000, 2.176324, 2.175659, 2.175006},
    {236.768400, 19.353218, 8.886743, 6.094211, 4.875872, 4.206658, 3.787044, 3.500464, 3.292746, 3.135465, 3.012330, 2.913358, 2.832098, 2.764199, 2.706627, 2.657197, 2.614299, 2.576722, 2.543534, 2.514011, 2.487578, 2.463774, 2.442226, 2.422629, 2.404728, 2.388314, 2.373208, 2.359260, 2.346342, 2.334344, 2.323171, 2.312741, 2.302982, 2.293832, 2.285235, 2.277143, 2.269512, 2.262304, 2.255485, 2.249024, 2.242894, 2.237070, 2.231530, 2.226253, 2.221221, 2.216417, 2.211827, 2.207436, 2.203232, 2.199202, 2.195337, 2.191626, 2.188061, 2.184632, 2.181333, 2.178156, 2.175094, 2.172141, 2.169292, 2.166541, 2.163883, 2.161314, 2.158829, 2.156424, 2.154095, 2.151839, 2.149653, 2.147532, 2.145475, 2.143478, 2.141539, 2.139656, 2.137825, 2.136045, 2.134314, 2.132630, 2.130990, 2.129394, 2.127839, 2.126324, 2.124848, 2.123408, 2.122004, 2.120633, 2.119296, 2.117991, 2.116717, 2.115472, 2.114255, 2.113067, 2.111905, 2.110769, 2.109657, 2.108570, 2.107506, 2.106465, 2.105446, 2.104448, 2.103471, 2.102513, 2.101575, 2.100656, 2.099755, 2.098871, 2.098005, 2.097155, 2.096321, 2.095504, 2.094701, 2.093913, 2.093140, 2.092381, 2.091635, 2.090903, 2.090184, 2.089477, 2.088783, 2.088100, 2.087430, 2.086770},
    {238.882695, 19.370993, 8.845238, 6.041044, 4.818320, 4.146804, 3.725725, 3.438101, 3.229583, 3.071658, 2.947990, 2.848565, 2.766913, 2.698672, 2.640797, 2.591096, 2.547955, 2.510158, 2.476770, 2.447064, 2.420462, 2.396503, 2.374812, 2.355081, 2.337057, 2.320527, 2.305313, 2.291264, 2.278251, 2.266163, 2.254906, 2.244396, 2.234562, 2.225340, 2.216675, 2.208518, 2.200826, 2.193559, 2.186685, 2.180170, 2.173989, 2.168117, 2.162530, 2.157208, 2.152133, 2.147288, 2.142658, 2.138229, 2.133988, 2.129923, 2.126023, 2.122280, 2.118682, 2.115223, 2.111894, 2.108688, 2.105599, 2.102620, 2.099744, 2.096968, 2.094286, 2.091693, 2.089185, 2.086758, 2.084407, 2.082130, 2.079923, 2.077783, 2.075706, 2.073690, 2.071733, 2.069832, 2.067984, 2.066187, 2.064439, 2.062739, 2.061084, 2.059472, 2.057902, 2.056373, 2.054882, 2.053428, 2.052010, 2.050627, 2.049276, 2.047958, 2.046671, 2.045414, 2.044186, 2.042986, 2.041812, 2.040665, 2.039543, 2.038445, 2.037370, 2.036319, 2.035290, 2.034282, 2.033295, 2.032328, 2.031380, 2.030451, 2.029541, 2.028649, 2.027774, 2.026916, 2.026074, 2.025247, 2.024437, 2.023641, 2.022860, 2.022093, 2.021340, 2.020600, 2.019874, 2.019160, 2.018459, 2.017769, 2.017092, 2.016426},
    {240.543255, 19.384826, 8.812300, 5.998779, 4.772466, 4.099016, 3.676675, 3.388130, 3.178893, 3.020383, 2.896223, 2.796375, 2.714356, 2.645791, 2.587626, 2.537667, 2.494291, 2.456281, 2.422699, 2.392814, 2.366048, 2.341937, 2.320105, 2.300244, 2.282097, 2.265453, 2.250131, 2.235982, 2.222874, 2.210697, 2.199355, 2.188766, 2.178856, 2.169562, 2.160829, 2.152607, 2.144853, 2.137528, 2.130597, 2.124029, 2.117797, 2.111875, 2.106241, 2.100873, 2.095755, 2.090868, 2.086198, 2.081730, 2.077452, 2.073351, 2.069417, 2.065640, 2.062011, 2.058520, 2.055161, 2.051926, 2.048808, 2.045801, 2.042900, 2.040098, 2.037391, 2.034774, 2.032242, 2.029792, 2.027419, 2.025121, 2.022893, 2.020732, 2.018636, 2.016601, 2.014625, 2.012705, 2.010839, 2.009025, 2.007260, 2.005543, 2.003872, 2.002245, 2.000659, 1.999115, 1.997609, 1.996141, 1.994709, 1.993312, 1.991949, 1.990617, 1.989318, 1.988048, 1.986807, 1.985595, 1.984410, 1.983251, 1.982117, 1.981008, 1.979923, 1.978861, 1.977821, 1.976803, 1.975806, 1.974829, 1.973872, 1.972934, 1.972014, 1.971113, 1.970229, 1.969362, 1.968511, 1.967677, 1.966858, 1.966054, 1.965265, 1.964490, 1.963729, 1.962982, 1.962247, 1.961526, 1.960818, 1.960121, 1.959436, 1.958763},
    {241.881747, 19.395897, 8.785525, 5.964371, 4.735063, 4.059963, 3.636523, 3.347163, 3.137280, 2.978237, 2.853625, 2.753387, 2.671024, 2.602155, 2.543719, 2.493513, 2.449916, 2.411702, 2.377934, 2.347878, 2.320953, 2.296696, 2.274728, 2.254739, 2.236474, 2.219718, 2.204292, 2.190044, 2.176844, 2.164580, 2.153156, 2.142488, 2.132504, 2.123140, 2.114340, 2.106054, 2.098239, 2.090856, 2.083869, 2.077248, 2.070965, 2.064994, 2.059313, 2.053901, 2.048739, 2.043811, 2.039101, 2.034595, 2.030279, 2.026143, 2.022175, 2.018364, 2.014702, 2.011181, 2.007792, 2.004528, 2.001382, 1.998348, 1.995419, 1.992592, 1.989860, 1.987219, 1.984664, 1.982191, 1.979796, 1.977476, 1.975227, 1.973045, 1.970929, 1.968875, 1.966880, 1.964942, 1.963058, 1.961227, 1.959445, 1.957711, 1.956024, 1.954381, 1.952780, 1.951220, 1.949700, 1.948217, 1.946771, 1.945361, 1.943984, 1.942639, 1.941327, 1.940044, 1.938791, 1.937567, 1.936370, 1.935199, 1.934054, 1.932934, 1.931838, 1.930765, 1.929715, 1.928687, 1.927679, 1.926692, 1.925726, 1.924778, 1.923849, 1.922938, 1.922045, 1.921169, 1.920310, 1.919467, 1.918639, 1.917827, 1.917030, 1.916247, 1.915478, 1.914723, 1.913982, 1.913253, 1.912537, 1.911833, 1.911141, 1.910461},
    {242.983458, 19.404958, 8.763333, 5.935813, 4.703967, 4.027442, 3.603037, 3.312951, 3.102485, 2.942957, 2.817930, 2.717331, 2.634650, 2.565497, 2.506806, 2.456369, 2.412561, 2.374156, 2.340210, 2.309991, 2.282916, 2.258518, 2.236419, 2.216309, 2.197929, 2.181067, 2.165540, 2.151197, 2.137908, 2.125559, 2.114054, 2.103311, 2.093254, 2.083822, 2.074956, 2.066608, 2.058734, 2.051294, 2.044253, 2.037580, 2.031247, 2.025229, 2.019502, 2.014046, 2.008842, 2.003873, 1.999124, 1.994580, 1.990228, 1.986056, 1.982054, 1.978211, 1.974518, 1.970965, 1.967547, 1.964254, 1.961080, 1.958019, 1.955065, 1.952212, 1.949455, 1.946790, 1.944212, 1.941716, 1.939300, 1.936958, 1.934688, 1.932487, 1.930351, 1.928278, 1.926264, 1.924308, 1.922406, 1.920557, 1.918759, 1.917009, 1.915305, 1.913646, 1.912030, 1.910456, 1.908921, 1.907424, 1.905964, 1.904539, 1.903149, 1.901791, 1.900466, 1.899171, 1.897906, 1.896669, 1.895460, 1.894278, 1.893122, 1.891991, 1.890884, 1.889800, 1.888740, 1.887701, 1.886684, 1.885687, 1.884710, 1.883753, 1.882815, 1.881895, 1.880993, 1.880108, 1.879240, 1.878388, 1.877552, 1.876732, 1.875927, 1.875136, 1.874359, 1.873596, 1.872847, 1.872111, 1.871387, 1.870676, 1.869978, 1.869290},
    {243.906038, 19.412511, 8.744641, 5.911729, 4.677704, 3.999935, 3.574676, 3.283939, 3.072947, 2.912977, 2.787569, 2.686637, 2.603661, 2.534243, 2.475313, 2.424660, 2.380654, 2.342067, 2.307954, 2.277581, 2.250362, 2.225831, 2.203607, 2.183380, 2.164891, 2.147926, 2.132303, 2.117869, 2.104493, 2.092063, 2.080482, 2.069665, 2.059539, 2.050040, 2.041111, 2.032703, 2.024771, 2.017276, 2.010183, 2.003459, 1.997078, 1.991013, 1.985242, 1.979743, 1.974498, 1.969490, 1.964702, 1.960121, 1.955734, 1.951528, 1.947492, 1.943617, 1.939893, 1.936311, 1.932863, 1.929542, 1.926341, 1.923253, 1.920274, 1.917396, 1.914615, 1.911926, 1.909325, 1.906808, 1.904370, 1.902007, 1.899717, 1.897496, 1.895340, 1.893248, 1.891216, 1.889242, 1.887323, 1.885457, 1.883642, 1.881876, 1.880157, 1.878482, 1.876851, 1.875262, 1.873712, 1.872201, 1.870727, 1.869289, 1.867886, 1.866515, 1.865177, 1.863870, 1.862593, 1.861344, 1.860124, 1.858930, 1.857763, 1.856621, 1.855503, 1.854409, 1.853338, 1.852289, 1.851262, 1.850255, 1.849269, 1.848302, 1.847355, 1.846426, 1.845515, 1.844621, 1.843745, 1.842884, 1.842040, 1.841212, 1.840398, 1.839599, 1.838815, 1.838045, 1.837288, 1.836544, 1.835813, 1.835095, 1.834389, 1.833695},
};

}  // namespace

double f_critical_value_05(std::size_t df1, std::size_t df2) {
  if (df1 < 1 || df2 < 1) {
    throw ValidationError("f_critical_value_05: degrees of freedom must be >= 1");
  }
  if (df1 > kMaxDf1) {
    throw ValidationError("f_critical_value_05: df1 > 12 is outside the embedded table");
  }
  df2 = std::min<std::size_t>(df2, kMaxDf2);
  return kFTable05[df1 - 1][df2 - 1];
}

}  // namespace iotw::evalstats
