/**
 * The VGG-16 convolutional backbone as the classifier's arch file lays it
 * out: 13 conv layers (3x3, stride 1, pad 1) interleaved with 5 pools.
 * `archIndex` is each conv layer's position in that file, which fixes the
 * CNWF entry names `<archIndex>.kernels` / `<archIndex>.bias`.
 */

export const KERNEL_SIZE = 3;
export const INPUT_CHANNELS = 3;
export const FEATURE_DIM = 25088; // 512 x 7 x 7 at 224x224 input

export interface ConvLayer {
  /** Source layer name ("block1_conv1" ... "block5_conv3"). */
  name: string;
  /** Layer index in the classifier's default arch file. */
  archIndex: number;
  inChannels: number;
  filters: number;
}

export const VGG16_CONV_LAYERS: readonly ConvLayer[] = [
  { name: "block1_conv1", archIndex: 0, inChannels: 3, filters: 64 },
  { name: "block1_conv2", archIndex: 1, inChannels: 64, filters: 64 },
  { name: "block2_conv1", archIndex: 3, inChannels: 64, filters: 128 },
  { name: "block2_conv2", archIndex: 4, inChannels: 128, filters: 128 },
  { name: "block3_conv1", archIndex: 6, inChannels: 128, filters: 256 },
  { name: "block3_conv2", archIndex: 7, inChannels: 256, filters: 256 },
  { name: "block3_conv3", archIndex: 8, inChannels: 256, filters: 256 },
  { name: "block4_conv1", archIndex: 10, inChannels: 256, filters: 512 },
  { name: "block4_conv2", archIndex: 11, inChannels: 512, filters: 512 },
  { name: "block4_conv3", archIndex: 12, inChannels: 512, filters: 512 },
  { name: "block5_conv1", archIndex: 14, inChannels: 512, filters: 512 },
  { name: "block5_conv2", archIndex: 15, inChannels: 512, filters: 512 },
  { name: "block5_conv3", archIndex: 16, inChannels: 512, filters: 512 },
];

/** Conv parameter count of the backbone (kernels + biases). */
export function backboneParameterCount(): number {
  let total = 0;
  for (const l of VGG16_CONV_LAYERS) {
    total += l.filters * l.inChannels * KERNEL_SIZE * KERNEL_SIZE + l.filters;
  }
  return total;
}
